#include "support.hpp"

#include <cmath>
#include <random>

#include "simr/ops.hpp"

namespace simr::testing {

Tensor<double> random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> out(shape);
  for (auto& v : out.values()) v = dist(rng);
  return out;
}

Tensor<float> random_tensorf(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  return random_tensor(shape, seed, lo, hi).cast<float>();
}

std::vector<std::complex<double>> naive_dft2(const double* x, std::size_t h, std::size_t w) {
  const double two_pi = 2.0 * 3.14159265358979323846;
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t ky = 0; ky < h; ++ky) {
    for (std::size_t kx = 0; kx < w; ++kx) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double phase = -two_pi * (static_cast<double>(ky * i) / static_cast<double>(h) +
                                          static_cast<double>(kx * j) / static_cast<double>(w));
          acc += x[i * w + j] * std::polar(1.0, phase);
        }
      }
      out[ky * w + kx] = acc;
    }
  }
  return out;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const Tensor<double>& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

Var<double> probe_loss(Tape<double>& tape, const Var<double>& x) {
  static const Tensor<double> coeffs = random_tensor({1 << 16}, 99);
  const std::size_t n = x.size();
  Tensor<double> c({1, n});
  for (std::size_t i = 0; i < n; ++i) c[i] = coeffs[i % coeffs.size()];
  auto flat = reshape(tape, x, {n, 1, 1});
  auto proj = pointwise_linear(tape, flat, Var<double>::constant(std::move(c)), Var<double>::constant(Tensor<double>({1})));
  return reshape(tape, proj, {1});
}

}  // namespace simr::testing
