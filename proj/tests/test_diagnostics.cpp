#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "simr/diagnostics.hpp"
#include "support.hpp"

using namespace simr;
using simr::testing::random_tensor;
using simr::testing::sample_field;

namespace {

double sum_of(const SpectrumCurve& c) { return std::accumulate(c.values.begin(), c.values.end(), 0.0); }

// Windowed SSIM by explicit 2D weighted sums with periodic wrap.
double direct_ssim(const Tensor<double>& x, const Tensor<double>& y, std::size_t win, double sigma) {
  const std::size_t h = x.dim(0), w = x.dim(1);
  const long r = static_cast<long>(win / 2);
  std::vector<double> g(win * win);
  double gs = 0.0;
  for (long a = -r; a <= r; ++a) {
    for (long b = -r; b <= r; ++b) {
      const double v = std::exp(-static_cast<double>(a * a + b * b) / (2 * sigma * sigma));
      g[static_cast<std::size_t>((a + r) * static_cast<long>(win) + b + r)] = v;
      gs += v;
    }
  }
  const auto [lo, hi] = std::minmax_element(y.values().begin(), y.values().end());
  const double range = *hi - *lo, c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (long a = -r; a <= r; ++a) {
        for (long b = -r; b <= r; ++b) {
          const std::size_t ii = (i + h + static_cast<std::size_t>(a + static_cast<long>(h))) % h;
          const std::size_t jj = (j + w + static_cast<std::size_t>(b + static_cast<long>(w))) % w;
          const double wt = g[static_cast<std::size_t>((a + r) * static_cast<long>(win) + b + r)] / gs;
          const double xv = x[ii * w + jj], yv = y[ii * w + jj];
          mx += wt * xv;
          my += wt * yv;
          sxx += wt * xv * xv;
          syy += wt * yv * yv;
          sxy += wt * xv * yv;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / static_cast<double>(h * w);
}

}  // namespace

TEST_CASE("pointwise metrics") {
  Tensor<double> truth({2, 2}, std::vector<double>{0, 1, 2, 3}), pred({2, 2}, std::vector<double>{1, 1, 2, 5});
  CHECK(mse(pred, truth) == doctest::Approx(1.25));
  CHECK(rel_l2(pred, truth) == doctest::Approx(std::sqrt(5.0 / 14.0)));
  CHECK(psnr(pred, truth) == doctest::Approx(10.0 * std::log10(9.0 / 1.25)));
  CHECK(std::isinf(psnr(truth, truth)));
  CHECK(rel_l2(truth, truth) == 0.0);
  CHECK_THROWS_AS(rel_l2(pred, Tensor<double>({2, 2})), UndefinedMetric);
  CHECK_THROWS_AS(psnr(pred, Tensor<double>({2, 2}, 1.0)), UndefinedMetric);
  CHECK_THROWS_AS(mse(pred, Tensor<double>({4})), DimensionError);
}

TEST_CASE("SSIM agrees with direct windowed sums") {
  auto y = random_tensor({16, 16}, 1);
  auto x = y;
  auto noise = random_tensor({16, 16}, 2, -0.3, 0.3);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += noise[i];
  CHECK(ssim(x, y) == doctest::Approx(direct_ssim(x, y, 11, 1.5)).epsilon(1e-10));
  CHECK(ssim(y, y) == doctest::Approx(1.0).epsilon(1e-12));
  SsimOptions small{5, 1.0, 0.01, 0.03};
  CHECK(ssim(x, y, small) == doctest::Approx(direct_ssim(x, y, 5, 1.0)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(x, y, SsimOptions{4, 1.0, 0.01, 0.03}), ConfigError);
}

TEST_CASE("Gaussian window") {
  auto g = gaussian_window(11, 1.5);
  CHECK(std::accumulate(g.begin(), g.end(), 0.0) == doctest::Approx(1.0));
  CHECK(g[5] == *std::max_element(g.begin(), g.end()));
  CHECK(g[0] == doctest::Approx(g[10]));
  CHECK(g[4] / g[5] == doctest::Approx(std::exp(-1.0 / 4.5)));
}

TEST_CASE("spectra of sin y") {
  auto w = sample_field(32, [](double, double y) { return std::sin(y); });
  auto e = energy_spectrum(w), z = enstrophy_spectrum(w);
  REQUIRE(e.k.front() == 1);
  CHECK(e.values[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(z.values[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sum_of(e) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e.k.back() == 23);
}

TEST_CASE("enstrophy equals k squared times energy") {
  auto ring = sample_field(32, [](double x, double y) { return std::sin(3 * y) + 0.5 * std::cos(4 * x + 3 * y); });
  auto e = energy_spectrum(ring), z = enstrophy_spectrum(ring);
  for (std::size_t i = 0; i < e.k.size(); ++i) {
    const double k = e.k[i];
    CHECK(z.values[i] == doctest::Approx(k * k * e.values[i]).epsilon(1e-10).scale(1e-14));
  }
  CHECK(z.values[2] > 0.0);
  CHECK(z.values[4] > 0.0);

  auto rough = random_tensor({32, 32}, 3);
  auto zw = enstrophy_spectrum(rough), kw = wavenumber_weighted_energy(rough);
  for (std::size_t i = 0; i < zw.k.size(); ++i) CHECK(kw.values[i] == doctest::Approx(zw.values[i]).epsilon(1e-10));
}

TEST_CASE("spectra sum to domain totals") {
  auto w = random_tensor({32, 32}, 4);
  double mean = 0.0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(w.size());
  double z = 0.0;
  for (double v : w.values()) z += 0.5 * (v - mean) * (v - mean);
  z /= static_cast<double>(w.size());
  CHECK(sum_of(enstrophy_spectrum(w)) == doctest::Approx(z).epsilon(1e-12));
  CHECK(sum_of(energy_spectrum(w)) == doctest::Approx(kinetic_energy(to_spectral(w))).epsilon(1e-12));
}

TEST_CASE("spectra ignore periodic shifts") {
  auto w = random_tensor({16, 16}, 5);
  Tensor<double> s({16, 16});
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) s[((i + 5) % 16) * 16 + (j + 11) % 16] = w[i * 16 + j];
  }
  auto a = energy_spectrum(w), b = energy_spectrum(s);
  for (std::size_t i = 0; i < a.k.size(); ++i) CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-10));
}

TEST_CASE("log spectrum error") {
  SpectrumCurve t{{1, 2, 3, 4}, {1.0, 0.5, 0.0, 0.1}}, p{{1, 2, 3, 4}, {2.0, 0.5, 1.0, 0.0}};
  CHECK(log_spectrum_error(t, t, 0, 4) == 0.0);
  // shells 2..4: |log .5 - log .5| + (skip zero truth) + |log 1e-30 - log .1|
  CHECK(log_spectrum_error(p, t, 1, 4) == doctest::Approx(std::abs(std::log(1e-30) - std::log(0.1))));
  CHECK(log_spectrum_error(p, t, 0, 1) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(log_spectrum_error(SpectrumCurve{{1}, {1.0}}, t, 0, 4), DimensionError);
}

TEST_CASE("POD energy agrees with an SVD of the centred snapshots") {
  std::vector<Tensor<double>> snaps;
  for (std::uint64_t s = 0; s < 6; ++s) snaps.push_back(random_tensor({4, 5}, 10 + s));
  auto pod = pod_cumulative(snaps);

  Eigen::MatrixXd x(6, 20);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 20; ++j) x(i, j) = snaps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto sv = svd.singularValues();
  REQUIRE(pod.singular_values.size() == 6);
  double total = 0.0, run = 0.0;
  for (int i = 0; i < sv.size(); ++i) total += sv(i) * sv(i);
  for (int i = 0; i < sv.size(); ++i) {
    run += sv(i) * sv(i);
    CHECK(pod.singular_values[static_cast<std::size_t>(i)] == doctest::Approx(sv(i)).epsilon(1e-8).scale(1e-6));
    CHECK(pod.cumulative[static_cast<std::size_t>(i)] == doctest::Approx(run / total).epsilon(1e-10));
  }
  CHECK(pod.cumulative.back() == 1.0);
  CHECK(std::is_sorted(pod.cumulative.begin(), pod.cumulative.end()));
}

TEST_CASE("POD of identical snapshots is degenerate") {
  std::vector<Tensor<double>> same(3, random_tensor({4, 4}, 1));
  auto pod = pod_cumulative(same);
  CHECK(pod.degenerate);
  CHECK(pod.cumulative == std::vector<double>{1.0, 1.0, 1.0});
  CHECK_THROWS_AS(pod_cumulative(std::vector<Tensor<double>>{same[0]}), ConfigError);
}

TEST_CASE("summary statistics") {
  auto s = aggregate_stats({4.0, 1.0, 3.0, 2.0});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.q1 == doctest::Approx(1.75));
  CHECK(s.q3 == doctest::Approx(3.25));
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.upper_fence == doctest::Approx(5.5));
  CHECK(s.outliers == 0);
  CHECK(aggregate_stats({1, 1, 1, 1, 10}).outliers == 1);
  CHECK_THROWS_AS(aggregate_stats({}), ConfigError);
}

TEST_CASE("metrics CSV formatting") {
  MetricsRecord r{7, 0.5, 0.25, std::numeric_limits<double>::infinity(), 1.0};
  CHECK(metrics_csv("fno", {r}) == "model,sample_index,mse,rel_l2,psnr_db,ssim\nfno,7,0.5,0.25,inf,1\n");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333");
}
