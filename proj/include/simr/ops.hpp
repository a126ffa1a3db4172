#pragma once

// Differentiable operations. Every op takes the tape first; inputs that do
// not require gradients are never written to.
//
// Feature fields are [C,H,W]. Complex spectra are stored as real tensors with
// a trailing axis of 2 (real, imaginary): [C,H,W/2+1,2].

#include <cstddef>

#include "simr/autodiff.hpp"
#include "simr/kernels.hpp"

namespace simr {

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

/// a * constant
template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T factor);

/// alpha * x with alpha a learnable scalar (shape [1]).
template <typename T>
Var<T> scalar_mul(Tape<T>& tape, const Var<T>& alpha, const Var<T>& x);

/// [C1,H,W] (+) [C2,H,W] -> [C1+C2,H,W]
template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> reshape(Tape<T>& tape, const Var<T>& x, Shape shape);

/// Exact GELU, x * Phi(x).
template <typename T>
Var<T> gelu(Tape<T>& tape, const Var<T>& x);

template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x);

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& x);

template <typename T>
Var<T> mean(Tape<T>& tape, const Var<T>& x);

/// Sum of squares, a scalar.
template <typename T>
Var<T> sum_squares(Tape<T>& tape, const Var<T>& x);

/// Periodic (circular padding) 3x3 convolution.
/// input [C_in,H,W], kernel [C_out,C_in,3,3], bias [C_out] -> [C_out,H,W]
template <typename T>
Var<T> conv2d_periodic(Tape<T>& tape, const Var<T>& input, const Var<T>& kernel, const Var<T>& bias);

/// Per-pixel affine channel map. input [C_in,H,W], weight [C_out,C_in], bias [C_out].
template <typename T>
Var<T> pointwise_linear(Tape<T>& tape, const Var<T>& input, const Var<T>& weight, const Var<T>& bias);

/// Unnormalized forward transform of every channel: [C,H,W] -> [C,H,W/2+1,2].
template <typename T>
Var<T> rfft2(Tape<T>& tape, const Var<T>& input);

/// Inverse of rfft2 (divides by H*W): [C,H,W/2+1,2] -> [C,H,out_w].
/// Non-Hermitian content in the self-conjugate columns is projected out.
template <typename T>
Var<T> irfft2(Tape<T>& tape, const Var<T>& spectrum, std::size_t out_w);

enum class InterpKind { bicubic, bilinear };

/// Source coordinate for target index d when resizing n -> m:
///   half_pixel: s = (d + 0.5) * n / m - 0.5   (align-corners false)
///   asymmetric: s = d * n / m                 (target index 0 sits on a source knot)
enum class GridMapping { half_pixel, asymmetric };

/// Cubic convolution kernel with a = -0.75.
double cubic_weight(double x);

template <typename T>
kernels::Interp1D<T> interp_matrix(std::size_t src, std::size_t dst, InterpKind kind,
                                   GridMapping mapping = GridMapping::half_pixel);

/// True when every stride-(dst/src) sample of the dst grid, anchored at 0,
/// maps exactly onto a source knot under the given mapping. Only then does
/// restriction undo interpolation.
bool knots_aligned(std::size_t src, std::size_t dst, GridMapping mapping);

/// Separable resize [C,H,W] -> [C,out_h,out_w]; edge indices clamp.
template <typename T>
Var<T> resize(Tape<T>& tape, const Var<T>& input, std::size_t out_h, std::size_t out_w, InterpKind kind,
              GridMapping mapping = GridMapping::half_pixel);

}  // namespace simr
