#pragma once

#include <complex>
#include <cstddef>

namespace simr::fft {

bool is_power_of_two(std::size_t n);

/// Throws ConfigError unless both sizes are powers of two.
void require_power_of_two(std::size_t h, std::size_t w);

/// Unnormalized real-to-complex 2D transform of one h x w plane into the
/// half spectrum of shape h x (w/2+1).
template <typename T>
void r2c(const T* in, std::size_t h, std::size_t w, std::complex<T>* out);

/// Real part of the half-spectrum synthesis
///   x(n) = Re( sum_k c(kx) Y(k) exp(+i k.n) ),  c = 1 on the kx = 0 and kx = w/2
///   columns and c = 2 on interior columns,
/// unnormalized. Equivalent to a c2r transform of the Hermitian projection of
/// Y; the input is not modified.
template <typename T>
void c2r(const std::complex<T>* in, std::size_t h, std::size_t w, T* out);

}  // namespace simr::fft
