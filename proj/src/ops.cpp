#include "simr/ops.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "simr/fft.hpp"

namespace simr {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
  }
}

template <typename T>
void require_rank(const Var<T>& x, std::size_t rank, const char* op, const char* what) {
  if (x.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

void require_axis(std::size_t got, std::size_t want, const char* op, const char* axis) {
  if (got != want) {
    throw DimensionError(std::string(op) + ": axis " + axis + " has size " + std::to_string(got) + ", expected " +
                         std::to_string(want));
  }
}

template <typename T>
std::complex<T>* as_complex(T* p) {
  return reinterpret_cast<std::complex<T>*>(p);
}
template <typename T>
const std::complex<T>* as_complex(const T* p) {
  return reinterpret_cast<const std::complex<T>*>(p);
}

}  // namespace

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  out += b.value();
  return tape.emit(std::move(out), {a, b}, [a, b](const Tensor<T>& g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return tape.emit(std::move(out), {a, b}, [a, b](const Tensor<T>& g) {
    accumulate_grad(a, g);
    if (b.requires_grad()) {
      auto& gb = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return tape.emit(std::move(out), {a}, [a, factor](const Tensor<T>& g) {
    auto& ga = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

template <typename T>
Var<T> scalar_mul(Tape<T>& tape, const Var<T>& alpha, const Var<T>& x) {
  if (alpha.size() != 1) throw DimensionError("scalar_mul: alpha must hold one element, got " + shape_str(alpha.shape()));
  const T s = alpha.value()[0];
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v *= s;
  return tape.emit(std::move(out), {alpha, x}, [alpha, x, s](const Tensor<T>& g) {
    if (alpha.requires_grad()) {
      T acc{0};
      const auto& xv = x.value();
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      alpha.grad_buffer()[0] += acc;
    }
    if (x.requires_grad()) {
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
    }
  });
}

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_rank(a, 3, "concat_channels", "first input");
  require_rank(b, 3, "concat_channels", "second input");
  require_axis(b.shape()[1], a.shape()[1], "concat_channels", "H");
  require_axis(b.shape()[2], a.shape()[2], "concat_channels", "W");
  const std::size_t na = a.size();
  std::vector<T> data(a.value().values().begin(), a.value().values().end());
  data.insert(data.end(), b.value().values().begin(), b.value().values().end());
  Tensor<T> out({a.shape()[0] + b.shape()[0], a.shape()[1], a.shape()[2]}, std::move(data));
  return tape.emit(std::move(out), {a, b}, [a, b, na](const Tensor<T>& g) {
    if (a.requires_grad()) {
      auto& ga = a.grad_buffer();
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_buffer();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  });
}

template <typename T>
Var<T> reshape(Tape<T>& tape, const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return tape.emit(std::move(out), {x}, [x](const Tensor<T>& g) {
    auto& gx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> gelu(Tape<T>& tape, const Var<T>& x) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = v * T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
  return tape.emit(std::move(out), {x}, [x, inv_sqrt2](const Tensor<T>& g) {
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    auto& gx = x.grad_buffer();
    const auto& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = xv[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  auto y = out;
  return tape.emit(std::move(out), {x}, [x, y = std::move(y)](const Tensor<T>& g) {
    auto& gx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& x) {
  T s{0};
  for (T v : x.value().values()) s += v;
  return tape.emit(Tensor<T>({1}, s), {x}, [x](const Tensor<T>& g) {
    auto& gx = x.grad_buffer();
    for (auto& v : gx.values()) v += g[0];
  });
}

template <typename T>
Var<T> mean(Tape<T>& tape, const Var<T>& x) {
  const T n = static_cast<T>(x.size());
  T s{0};
  for (T v : x.value().values()) s += v;
  return tape.emit(Tensor<T>({1}, s / n), {x}, [x, n](const Tensor<T>& g) {
    auto& gx = x.grad_buffer();
    for (auto& v : gx.values()) v += g[0] / n;
  });
}

template <typename T>
Var<T> sum_squares(Tape<T>& tape, const Var<T>& x) {
  T s{0};
  for (T v : x.value().values()) s += v * v;
  return tape.emit(Tensor<T>({1}, s), {x}, [x](const Tensor<T>& g) {
    auto& gx = x.grad_buffer();
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * xv[i] * g[0];
  });
}

template <typename T>
Var<T> conv2d_periodic(Tape<T>& tape, const Var<T>& input, const Var<T>& kernel, const Var<T>& bias) {
  require_rank(input, 3, "conv2d_periodic", "input");
  require_rank(kernel, 4, "conv2d_periodic", "kernel");
  require_rank(bias, 1, "conv2d_periodic", "bias");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  require_axis(ks[1], is[0], "conv2d_periodic", "kernel C_in");
  require_axis(ks[2], 3, "conv2d_periodic", "kernel height");
  require_axis(ks[3], 3, "conv2d_periodic", "kernel width");
  require_axis(bias.shape()[0], ks[0], "conv2d_periodic", "bias C_out");
  if (is[1] < 3) require_axis(is[1], 3, "conv2d_periodic", "H (minimum)");
  if (is[2] < 3) require_axis(is[2], 3, "conv2d_periodic", "W (minimum)");

  const kernels::ConvDims d{is[0], ks[0], is[1], is[2]};
  Tensor<T> out({d.c_out, d.h, d.w});
  kernels::conv3x3_periodic_forward(d, input.value().data(), kernel.value().data(), bias.value().data(), out.data());
  return tape.emit(std::move(out), {input, kernel, bias}, [input, kernel, bias, d](const Tensor<T>& g) {
    kernels::conv3x3_periodic_backward(d, input.value().data(), kernel.value().data(), g.data(),
                                       input.requires_grad() ? input.grad_buffer().data() : nullptr,
                                       kernel.requires_grad() ? kernel.grad_buffer().data() : nullptr,
                                       bias.requires_grad() ? bias.grad_buffer().data() : nullptr);
  });
}

template <typename T>
Var<T> pointwise_linear(Tape<T>& tape, const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
  require_rank(input, 3, "pointwise_linear", "input");
  require_rank(weight, 2, "pointwise_linear", "weight");
  require_rank(bias, 1, "pointwise_linear", "bias");
  require_axis(weight.shape()[1], input.shape()[0], "pointwise_linear", "weight C_in");
  require_axis(bias.shape()[0], weight.shape()[0], "pointwise_linear", "bias C_out");
  const kernels::PointwiseDims d{input.shape()[0], weight.shape()[0], input.shape()[1] * input.shape()[2]};
  Tensor<T> out({d.c_out, input.shape()[1], input.shape()[2]});
  kernels::pointwise_forward(d, input.value().data(), weight.value().data(), bias.value().data(), out.data());
  return tape.emit(std::move(out), {input, weight, bias}, [input, weight, bias, d](const Tensor<T>& g) {
    kernels::pointwise_backward(d, input.value().data(), weight.value().data(), g.data(),
                                input.requires_grad() ? input.grad_buffer().data() : nullptr,
                                weight.requires_grad() ? weight.grad_buffer().data() : nullptr,
                                bias.requires_grad() ? bias.grad_buffer().data() : nullptr);
  });
}

template <typename T>
Var<T> rfft2(Tape<T>& tape, const Var<T>& input) {
  require_rank(input, 3, "rfft2", "input");
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  fft::require_power_of_two(h, w);
  const std::size_t wh = w / 2 + 1;
  Tensor<T> out({c, h, wh, 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    fft::r2c(input.value().data() + ch * h * w, h, w, as_complex(out.data()) + ch * h * wh);
  }
  return tape.emit(std::move(out), {input}, [input, c, h, w, wh](const Tensor<T>& g) {
    // d/dx of Re/Im parts: x-gradient is Re(sum_k G(k) e^{+ik.n}) over the half
    // spectrum, i.e. the synthesis with interior columns weighted 1 instead of 2.
    std::vector<std::complex<T>> half(h * wh);
    std::vector<T> gx(h * w);
    auto& gi = input.grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::complex<T>* src = as_complex(g.data()) + ch * h * wh;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t k = 0; k < wh; ++k) {
          const bool edge = (k == 0) || (k == wh - 1);
          half[r * wh + k] = edge ? src[r * wh + k] : src[r * wh + k] * T(0.5);
        }
      }
      fft::c2r(half.data(), h, w, gx.data());
      T* dst = gi.data() + ch * h * w;
      for (std::size_t i = 0; i < h * w; ++i) dst[i] += gx[i];
    }
  });
}

template <typename T>
Var<T> irfft2(Tape<T>& tape, const Var<T>& spectrum, std::size_t out_w) {
  require_rank(spectrum, 4, "irfft2", "spectrum");
  const std::size_t c = spectrum.shape()[0], h = spectrum.shape()[1], wh = spectrum.shape()[2];
  require_axis(spectrum.shape()[3], 2, "irfft2", "complex");
  require_axis(wh, out_w / 2 + 1, "irfft2", "half-width");
  fft::require_power_of_two(h, out_w);
  const T norm = T(1) / static_cast<T>(h * out_w);
  Tensor<T> out({c, h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    T* dst = out.data() + ch * h * out_w;
    fft::c2r(as_complex(spectrum.value().data()) + ch * h * wh, h, out_w, dst);
    for (std::size_t i = 0; i < h * out_w; ++i) dst[i] *= norm;
  }
  return tape.emit(std::move(out), {spectrum}, [spectrum, c, h, wh, out_w, norm](const Tensor<T>& g) {
    std::vector<std::complex<T>> spec(h * wh);
    auto& gs = spectrum.grad_buffer();
    for (std::size_t ch = 0; ch < c; ++ch) {
      fft::r2c(g.data() + ch * h * out_w, h, out_w, spec.data());
      std::complex<T>* dst = as_complex(gs.data()) + ch * h * wh;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t k = 0; k < wh; ++k) {
          const bool edge = (k == 0) || (k == wh - 1);
          dst[r * wh + k] += spec[r * wh + k] * (edge ? norm : T(2) * norm);
        }
      }
    }
  });
}

double cubic_weight(double x) {
  constexpr double a = -0.75;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

template <typename T>
kernels::Interp1D<T> interp_matrix(std::size_t src, std::size_t dst, InterpKind kind, GridMapping mapping) {
  if (src == 0 || dst == 0) throw ConfigError("resize: zero-size axis");
  kernels::Interp1D<T> m{src, dst, std::vector<T>(src * dst, T{0})};
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  const auto clamp = [src](long i) { return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(src) - 1)); };
  for (std::size_t d = 0; d < dst; ++d) {
    const double s = mapping == GridMapping::half_pixel ? (static_cast<double>(d) + 0.5) * ratio - 0.5
                                                        : static_cast<double>(d) * ratio;
    const double fl = std::floor(s);
    const double t = s - fl;
    const long i0 = static_cast<long>(fl);
    T* row = m.matrix.data() + d * src;
    if (kind == InterpKind::bilinear) {
      row[clamp(i0)] += static_cast<T>(1.0 - t);
      row[clamp(i0 + 1)] += static_cast<T>(t);
    } else {
      row[clamp(i0 - 1)] += static_cast<T>(cubic_weight(t + 1.0));
      row[clamp(i0)] += static_cast<T>(cubic_weight(t));
      row[clamp(i0 + 1)] += static_cast<T>(cubic_weight(1.0 - t));
      row[clamp(i0 + 2)] += static_cast<T>(cubic_weight(2.0 - t));
    }
  }
  return m;
}

bool knots_aligned(std::size_t src, std::size_t dst, GridMapping mapping) {
  if (src == 0 || dst == 0 || dst % src != 0) return false;
  if (mapping == GridMapping::asymmetric) return true;
  // half_pixel: node m*stride maps to m + (src - dst) / (2 dst)
  return src == dst;
}

template <typename T>
Var<T> resize(Tape<T>& tape, const Var<T>& input, std::size_t out_h, std::size_t out_w, InterpKind kind,
              GridMapping mapping) {
  require_rank(input, 3, "resize", "input");
  if (out_h == 0 || out_w == 0) throw ConfigError("resize: target size must be at least 1x1");
  const std::size_t c = input.shape()[0];
  auto rh = interp_matrix<T>(input.shape()[1], out_h, kind, mapping);
  auto rw = interp_matrix<T>(input.shape()[2], out_w, kind, mapping);
  Tensor<T> out({c, out_h, out_w});
  kernels::separable_apply(c, rh, rw, input.value().data(), out.data());
  return tape.emit(std::move(out), {input}, [input, c, rh = std::move(rh), rw = std::move(rw)](const Tensor<T>& g) {
    kernels::separable_apply_transpose(c, rh, rw, g.data(), input.grad_buffer().data());
  });
}

#define SIMR_INSTANTIATE_OPS(T)                                                                                  \
  template Var<T> add<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                                \
  template Var<T> sub<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                                \
  template Var<T> scale<T>(Tape<T>&, const Var<T>&, T);                                                          \
  template Var<T> scalar_mul<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                         \
  template Var<T> concat_channels<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                    \
  template Var<T> reshape<T>(Tape<T>&, const Var<T>&, Shape);                                                    \
  template Var<T> gelu<T>(Tape<T>&, const Var<T>&);                                                              \
  template Var<T> sigmoid<T>(Tape<T>&, const Var<T>&);                                                           \
  template Var<T> sum<T>(Tape<T>&, const Var<T>&);                                                               \
  template Var<T> mean<T>(Tape<T>&, const Var<T>&);                                                              \
  template Var<T> sum_squares<T>(Tape<T>&, const Var<T>&);                                                       \
  template Var<T> conv2d_periodic<T>(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);                     \
  template Var<T> pointwise_linear<T>(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);                    \
  template Var<T> rfft2<T>(Tape<T>&, const Var<T>&);                                                             \
  template Var<T> irfft2<T>(Tape<T>&, const Var<T>&, std::size_t);                                               \
  template kernels::Interp1D<T> interp_matrix<T>(std::size_t, std::size_t, InterpKind, GridMapping);             \
  template Var<T> resize<T>(Tape<T>&, const Var<T>&, std::size_t, std::size_t, InterpKind, GridMapping);

SIMR_INSTANTIATE_OPS(float)
SIMR_INSTANTIATE_OPS(double)

}  // namespace simr
