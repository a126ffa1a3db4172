#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "simr/autodiff.hpp"
#include "simr/tensor.hpp"

namespace simr::testing {

/// Uniform entries in [lo, hi) from a fixed Mersenne Twister stream.
Tensor<double> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
Tensor<float> random_tensorf(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

/// Direct O(n^4) DFT of an h x w real plane, full spectrum, row-major.
std::vector<std::complex<double>> naive_dft2(const double* x, std::size_t h, std::size_t w);

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b);
double max_abs(const Tensor<double>& a);

/// Field f(row, col) sampled on an n x n grid over [0, 2pi)^2.
template <typename F>
Tensor<double> sample_field(std::size_t n, F f) {
  Tensor<double> out({n, n});
  const double h = 2.0 * 3.14159265358979323846 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = f(static_cast<double>(j) * h, static_cast<double>(i) * h);
  }
  return out;
}

/// Fixed random projection sum_i c_i x_i, so every entry of x gets a
/// distinct gradient and the loss stays O(sqrt(n)).
Var<double> probe_loss(Tape<double>& tape, const Var<double>& x);

}  // namespace simr::testing
