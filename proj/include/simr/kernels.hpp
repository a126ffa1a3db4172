#pragma once

// Compute kernels behind the differentiable ops.
//
// Every kernel has two implementations: an OpenMP/GEMM version used by the
// ops, and a plain serial loop nest in namespace `reference` that the tests
// and the benchmark compare against. Parallel loops only ever partition
// output elements, so results do not depend on the thread count.
//
// Backward kernels accumulate (+=) into their gradient outputs.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace simr::kernels {

struct ConvDims {
  std::size_t c_in, c_out, h, w;
};

/// out[c_out,h,w] = bias + periodic 3x3 cross-correlation of in[c_in,h,w]
/// with kernel[c_out,c_in,3,3].
template <typename T>
void conv3x3_periodic_forward(const ConvDims& d, const T* in, const T* kernel, const T* bias, T* out);

template <typename T>
void conv3x3_periodic_backward(const ConvDims& d, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                               T* grad_kernel, T* grad_bias);

struct PointwiseDims {
  std::size_t c_in, c_out, pixels;
};

/// out[c_out,p] = weight[c_out,c_in] * in[c_in,p] + bias[c_out]
template <typename T>
void pointwise_forward(const PointwiseDims& d, const T* in, const T* weight, const T* bias, T* out);

template <typename T>
void pointwise_backward(const PointwiseDims& d, const T* in, const T* weight, const T* grad_out, T* grad_in,
                        T* grad_weight, T* grad_bias);

/// Dense 1D interpolation operator (rows = target samples).
template <typename T>
struct Interp1D {
  std::size_t src = 0, dst = 0;
  std::vector<T> matrix;  // dst x src, row-major
};

/// out[c] = Rh * in[c] * Rw^T for every channel.
template <typename T>
void separable_apply(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw, const T* in, T* out);

/// grad_in[c] += Rh^T * grad_out[c] * Rw
template <typename T>
void separable_apply_transpose(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw,
                               const T* grad_out, T* grad_in);

/// Retained-mode layout of a truncated spectral multiplier on an h x (w/2+1)
/// half spectrum: kx in [0, k_max] and ky in [-k_max+1, k_max].
struct ModeBox {
  std::size_t h, w, k_max;
  std::size_t rows() const { return 2 * k_max; }
  std::size_t cols() const { return k_max + 1; }
  std::size_t modes() const { return rows() * cols(); }
  std::size_t half_w() const { return w / 2 + 1; }
  /// Spectrum row holding box row r.
  std::size_t spectrum_row(std::size_t r) const { return r <= k_max ? r : h - 2 * k_max + r; }
};

/// acc[co,m] = sum_ci W[co,ci,m] vhat[ci,m] over retained modes m;
/// out[co,:] = gate[m] * acc[co,m] on retained modes and 0 elsewhere.
/// vhat and out are full half spectra [c, h, w/2+1]; W is [c_out, c_in, modes].
template <typename T>
void spectral_mix_forward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                          const std::complex<T>* weights, const T* gate, std::complex<T>* acc,
                          std::complex<T>* out);

template <typename T>
void spectral_mix_backward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                           const std::complex<T>* weights, const T* gate, const std::complex<T>* acc,
                           const std::complex<T>* grad_out, std::complex<T>* grad_vhat,
                           std::complex<T>* grad_weights, T* grad_gate);

namespace reference {

template <typename T>
void conv3x3_periodic_forward(const ConvDims& d, const T* in, const T* kernel, const T* bias, T* out);
template <typename T>
void conv3x3_periodic_backward(const ConvDims& d, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                               T* grad_kernel, T* grad_bias);
template <typename T>
void pointwise_forward(const PointwiseDims& d, const T* in, const T* weight, const T* bias, T* out);
template <typename T>
void separable_apply(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw, const T* in, T* out);
template <typename T>
void spectral_mix_forward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                          const std::complex<T>* weights, const T* gate, std::complex<T>* out);

}  // namespace reference

}  // namespace simr::kernels
