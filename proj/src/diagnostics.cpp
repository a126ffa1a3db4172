#include "simr/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <sstream>

namespace simr {

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(who) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
std::pair<std::size_t, std::size_t> plane_dims(const Tensor<T>& t, const char* who) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 3 && t.dim(0) == 1) return {t.dim(1), t.dim(2)};
  throw DimensionError(std::string(who) + ": expected [H,W] or [1,H,W], got " + shape_str(t.shape()));
}

template <typename T>
double range_of(const Tensor<T>& t) {
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

// Periodic separable filter of an h x w plane.
std::vector<double> filter(const std::vector<double>& in, std::size_t h, std::size_t w, const std::vector<double>& taps) {
  const long r = static_cast<long>(taps.size() / 2);
  const auto wrap = [](long i, std::size_t n) { return static_cast<std::size_t>(((i % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n)); };
  std::vector<double> tmp(h * w), out(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (long t = -r; t <= r; ++t) s += taps[static_cast<std::size_t>(t + r)] * in[i * w + wrap(static_cast<long>(j) + t, w)];
      tmp[i * w + j] = s;
    }
  }
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (long t = -r; t <= r; ++t) s += taps[static_cast<std::size_t>(t + r)] * tmp[wrap(static_cast<long>(i) + t, h) * w + j];
      out[i * w + j] = s;
    }
  }
  return out;
}

enum class ShellQuantity { energy, enstrophy, weighted_energy };

SpectrumCurve shell_spectrum(const Field2D& omega, ShellQuantity q) {
  if (omega.rank() != 2 || omega.dim(0) != omega.dim(1)) {
    throw DimensionError("spectrum: square rank-2 field required, got " + shape_str(omega.shape()));
  }
  const std::size_t n = omega.dim(0);
  if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("spectrum: field size must be a power of two");
  const SpectralField s = to_spectral(omega);
  const double norm = 1.0 / static_cast<double>(n * n);
  const int half = static_cast<int>(n / 2);
  const int k_top = static_cast<int>(std::floor(std::sqrt(2.0) * half + 0.5));
  SpectrumCurve c;
  for (int k = 1; k <= k_top; ++k) c.k.push_back(k);
  c.values.assign(c.k.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const int ky = r <= n / 2 ? static_cast<int>(r) : static_cast<int>(r) - static_cast<int>(n);
    for (std::size_t col = 0; col < s.half(); ++col) {
      const int kx = static_cast<int>(col);
      const double k2 = static_cast<double>(kx * kx + ky * ky);
      if (k2 == 0.0) continue;
      const int shell = static_cast<int>(std::floor(std::sqrt(k2) + 0.5));
      if (shell < 1 || shell > k_top) continue;
      // each stored column other than 0 and n/2 stands for itself and its conjugate
      const double mult = (col == 0 || col == n / 2) ? 1.0 : 2.0;
      const std::complex<double> w = s.at(r, col) * norm;
      // velocity of the mode, u = (-i ky psi, i kx psi) with psi = -w / |k|^2
      const std::complex<double> psi = -w / k2;
      const double e = std::norm(std::complex<double>(0, -ky) * psi) + std::norm(std::complex<double>(0, kx) * psi);
      double v = 0.0;
      switch (q) {
        case ShellQuantity::energy: v = e; break;
        case ShellQuantity::enstrophy: v = std::norm(w); break;
        case ShellQuantity::weighted_energy: v = k2 * e; break;
      }
      c.values[static_cast<std::size_t>(shell - 1)] += 0.5 * mult * v;
    }
  }
  return c;
}

}  // namespace

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& truth) {
  require_same(pred, truth, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    s += d * d;
  }
  return pred.size() == 0 ? 0.0 : s / static_cast<double>(pred.size());
}

template <typename T>
double rel_l2(const Tensor<T>& pred, const Tensor<T>& truth) {
  require_same(pred, truth, "rel_l2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = static_cast<double>(truth[i]);
    const double d = static_cast<double>(pred[i]) - t;
    num += d * d;
    den += t * t;
  }
  if (den == 0.0) throw UndefinedMetric("rel_l2: ground truth has zero norm");
  return std::sqrt(num / den);
}

template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& truth) {
  require_same(pred, truth, "psnr");
  const double range = range_of(truth);
  if (range == 0.0) throw UndefinedMetric("psnr: ground truth is constant");
  const double m = mse(pred, truth);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / m);
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double c = static_cast<double>(size / 2);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    taps[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += taps[i];
  }
  for (auto& t : taps) t /= s;
  return taps;
}

template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& truth, const SsimOptions& options) {
  require_same(pred, truth, "ssim");
  const auto [h, w] = plane_dims(truth, "ssim");
  if (options.window == 0 || options.window % 2 == 0) throw ConfigError("ssim window must be odd");
  const double range = range_of(truth);
  const double c1 = (options.k1 * range) * (options.k1 * range);
  const double c2 = (options.k2 * range) * (options.k2 * range);
  const auto taps = gaussian_window(options.window, options.sigma);

  std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    x[i] = static_cast<double>(pred[i]);
    y[i] = static_cast<double>(truth[i]);
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter(x, h, w, taps), my = filter(y, h, w, taps);
  const auto sxx = filter(xx, h, w, taps), syy = filter(yy, h, w, taps), sxy = filter(xy, h, w, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < h * w; ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    total += den == 0.0 ? 1.0 : num / den;
  }
  return total / static_cast<double>(h * w);
}

template <typename T>
MetricsRecord compute_metrics(const Tensor<T>& pred, const Tensor<T>& truth, std::size_t sample_index,
                              const SsimOptions& options) {
  MetricsRecord r;
  r.sample_index = sample_index;
  r.mse = mse(pred, truth);
  r.rel_l2 = rel_l2(pred, truth);
  r.psnr = psnr(pred, truth);
  r.ssim = ssim(pred, truth, options);
  return r;
}

SpectrumCurve energy_spectrum(const Field2D& omega) { return shell_spectrum(omega, ShellQuantity::energy); }
SpectrumCurve enstrophy_spectrum(const Field2D& omega) { return shell_spectrum(omega, ShellQuantity::enstrophy); }
SpectrumCurve wavenumber_weighted_energy(const Field2D& omega) {
  return shell_spectrum(omega, ShellQuantity::weighted_energy);
}

template <typename T>
Field2D to_field(const Tensor<T>& t) {
  const auto [h, w] = plane_dims(t, "to_field");
  Field2D f({h, w});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(t[i]);
  return f;
}

double log_spectrum_error(const SpectrumCurve& pred, const SpectrumCurve& truth, int k_c, int k_max) {
  if (pred.k != truth.k) throw DimensionError("log_spectrum_error: curves have different shells");
  double e = 0.0;
  for (std::size_t i = 0; i < truth.k.size(); ++i) {
    const int k = truth.k[i];
    if (k <= k_c || k > k_max || truth.values[i] <= 0.0) continue;
    e += std::abs(std::log(std::max(pred.values[i], 1e-30)) - std::log(truth.values[i]));
  }
  return e;
}

template <typename T>
PODResult pod_cumulative(const std::vector<Tensor<T>>& snapshots) {
  const std::size_t n = snapshots.size();
  if (n < 2) throw ConfigError("pod_cumulative needs at least 2 snapshots, got " + std::to_string(n));
  const std::size_t p = snapshots[0].size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    if (snapshots[i].size() != p) throw DimensionError("pod_cumulative: snapshots differ in size");
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(snapshots[i][j]);
  }
  const double raw = x.squaredNorm();
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  std::vector<double> lambda(eig.eigenvalues().data(), eig.eigenvalues().data() + n);
  std::sort(lambda.begin(), lambda.end(), std::greater<>());
  for (auto& l : lambda) l = std::max(l, 0.0);
  double total = 0.0;
  for (double l : lambda) total += l;

  PODResult r;
  for (double l : lambda) r.singular_values.push_back(std::sqrt(l));
  if (total <= 1e-24 * std::max(raw, 1.0)) {
    r.degenerate = true;
    r.singular_values.assign(n, 0.0);
    r.cumulative.assign(n, 1.0);
    return r;
  }
  double run = 0.0;
  for (double l : lambda) {
    run += l;
    r.cumulative.push_back(std::min(run / total, 1.0));
  }
  r.cumulative.back() = 1.0;
  return r;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile of an empty set");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

AggregateStats aggregate_stats(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("aggregate_stats needs at least one record");
  AggregateStats s;
  s.count = values.size();
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(s.count));
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.min = sorted.front();
  s.max = sorted.back();
  s.upper_fence = s.q3 + 1.5 * (s.q3 - s.q1);
  for (double v : values) s.outliers += v > s.upper_fence ? 1 : 0;
  return s;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string metrics_csv(const std::string& model, const std::vector<MetricsRecord>& records) {
  std::ostringstream s;
  s << "model,sample_index,mse,rel_l2,psnr_db,ssim\n";
  for (const auto& r : records) {
    s << model << ',' << r.sample_index << ',' << format_number(r.mse) << ',' << format_number(r.rel_l2) << ','
      << format_number(r.psnr) << ',' << format_number(r.ssim) << '\n';
  }
  return s.str();
}

#define SIMR_INSTANTIATE_DIAG(T)                                                                         \
  template double mse<T>(const Tensor<T>&, const Tensor<T>&);                                            \
  template double rel_l2<T>(const Tensor<T>&, const Tensor<T>&);                                         \
  template double psnr<T>(const Tensor<T>&, const Tensor<T>&);                                           \
  template double ssim<T>(const Tensor<T>&, const Tensor<T>&, const SsimOptions&);                       \
  template MetricsRecord compute_metrics<T>(const Tensor<T>&, const Tensor<T>&, std::size_t,             \
                                            const SsimOptions&);                                         \
  template Field2D to_field<T>(const Tensor<T>&);                                                        \
  template PODResult pod_cumulative<T>(const std::vector<Tensor<T>>&);

SIMR_INSTANTIATE_DIAG(float)
SIMR_INSTANTIATE_DIAG(double)

}  // namespace simr
