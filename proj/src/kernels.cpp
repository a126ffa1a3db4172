#include "simr/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

namespace simr::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
T ordered_sum(const T* x, std::size_t n) {
  T s[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) s[l] += x[i + l];
  for (; i < n; ++i) s[i % 8] += x[i];
  return ((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7]));
}

// col[(ci*9 + a*3 + b), i*w + j] = in[ci, (i+a-1) mod h, (j+b-1) mod w]
template <typename T>
void im2col_periodic(const ConvDims& d, const T* in, T* col) {
  const std::size_t hw = d.h * d.w;
  const auto rows = static_cast<long>(d.c_in * 9);
#pragma omp parallel for schedule(static)
  for (long row = 0; row < rows; ++row) {
    const std::size_t ci = static_cast<std::size_t>(row) / 9;
    const std::size_t a = (static_cast<std::size_t>(row) / 3) % 3;
    const std::size_t b = static_cast<std::size_t>(row) % 3;
    const T* src = in + ci * hw;
    T* dst = col + static_cast<std::size_t>(row) * hw;
    for (std::size_t i = 0; i < d.h; ++i) {
      const T* s = src + ((i + d.h + a - 1) % d.h) * d.w;
      T* o = dst + i * d.w;
      // o[j] = s[(j + b - 1) mod w]
      if (b == 1) {
        std::memcpy(o, s, d.w * sizeof(T));
      } else if (b == 0) {
        o[0] = s[d.w - 1];
        std::memcpy(o + 1, s, (d.w - 1) * sizeof(T));
      } else {
        std::memcpy(o, s + 1, (d.w - 1) * sizeof(T));
        o[d.w - 1] = s[0];
      }
    }
  }
}

// grad_in[ci, r, c] += sum_{a,b} gcol[(ci,a,b), (r-a+1) mod h, (c-b+1) mod w]
template <typename T>
void col2im_periodic_add(const ConvDims& d, const T* gcol, T* grad_in) {
  const std::size_t hw = d.h * d.w;
  const auto channels = static_cast<long>(d.c_in);
#pragma omp parallel for schedule(static)
  for (long cil = 0; cil < channels; ++cil) {
    const auto ci = static_cast<std::size_t>(cil);
    T* g = grad_in + ci * hw;
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        const T* src = gcol + (ci * 9 + a * 3 + b) * hw;
        // col row i reads input row (i+a-1): input row r receives col row (r-a+1)
        for (std::size_t i = 0; i < d.h; ++i) {
          const std::size_t r = (i + d.h + a - 1) % d.h;
          const T* s = src + i * d.w;
          T* o = g + r * d.w;
          // o[(j + b - 1) mod w] += s[j]
          if (b == 1) {
            for (std::size_t j = 0; j < d.w; ++j) o[j] += s[j];
          } else if (b == 0) {
            o[d.w - 1] += s[0];
            for (std::size_t j = 1; j < d.w; ++j) o[j - 1] += s[j];
          } else {
            for (std::size_t j = 0; j + 1 < d.w; ++j) o[j + 1] += s[j];
            o[0] += s[d.w - 1];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv3x3_periodic_forward(const ConvDims& d, const T* in, const T* kernel, const T* bias, T* out) {
  const std::size_t hw = d.h * d.w;
  std::vector<T> col(d.c_in * 9 * hw);
  im2col_periodic(d, in, col.data());
  MapMat<T> o(out, static_cast<long>(d.c_out), static_cast<long>(hw));
  CMapMat<T> k(kernel, static_cast<long>(d.c_out), static_cast<long>(d.c_in * 9));
  CMapMat<T> c(col.data(), static_cast<long>(d.c_in * 9), static_cast<long>(hw));
  o.noalias() = k * c;
  for (std::size_t co = 0; co < d.c_out; ++co) o.row(static_cast<long>(co)).array() += bias[co];
}

template <typename T>
void conv3x3_periodic_backward(const ConvDims& d, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                               T* grad_kernel, T* grad_bias) {
  const std::size_t hw = d.h * d.w;
  const auto cin9 = static_cast<long>(d.c_in * 9);
  CMapMat<T> go(grad_out, static_cast<long>(d.c_out), static_cast<long>(hw));
  std::vector<T> col(d.c_in * 9 * hw);
  if (grad_kernel != nullptr) {
    im2col_periodic(d, in, col.data());
    CMapMat<T> c(col.data(), cin9, static_cast<long>(hw));
    MapMat<T> gk(grad_kernel, static_cast<long>(d.c_out), cin9);
    gk.noalias() += go * c.transpose();
  }
  if (grad_bias != nullptr) {
    for (std::size_t co = 0; co < d.c_out; ++co) grad_bias[co] += ordered_sum(grad_out + co * hw, hw);
  }
  if (grad_in != nullptr) {
    CMapMat<T> k(kernel, static_cast<long>(d.c_out), cin9);
    MapMat<T> gc(col.data(), cin9, static_cast<long>(hw));
    gc.noalias() = k.transpose() * go;
    col2im_periodic_add(d, col.data(), grad_in);
  }
}

template <typename T>
void pointwise_forward(const PointwiseDims& d, const T* in, const T* weight, const T* bias, T* out) {
  MapMat<T> o(out, static_cast<long>(d.c_out), static_cast<long>(d.pixels));
  CMapMat<T> w(weight, static_cast<long>(d.c_out), static_cast<long>(d.c_in));
  CMapMat<T> x(in, static_cast<long>(d.c_in), static_cast<long>(d.pixels));
  o.noalias() = w * x;
  for (std::size_t co = 0; co < d.c_out; ++co) o.row(static_cast<long>(co)).array() += bias[co];
}

template <typename T>
void pointwise_backward(const PointwiseDims& d, const T* in, const T* weight, const T* grad_out, T* grad_in,
                        T* grad_weight, T* grad_bias) {
  CMapMat<T> go(grad_out, static_cast<long>(d.c_out), static_cast<long>(d.pixels));
  if (grad_weight != nullptr) {
    CMapMat<T> x(in, static_cast<long>(d.c_in), static_cast<long>(d.pixels));
    MapMat<T> gw(grad_weight, static_cast<long>(d.c_out), static_cast<long>(d.c_in));
    gw.noalias() += go * x.transpose();
  }
  if (grad_bias != nullptr) {
    for (std::size_t co = 0; co < d.c_out; ++co) grad_bias[co] += ordered_sum(grad_out + co * d.pixels, d.pixels);
  }
  if (grad_in != nullptr) {
    CMapMat<T> w(weight, static_cast<long>(d.c_out), static_cast<long>(d.c_in));
    MapMat<T> gx(grad_in, static_cast<long>(d.c_in), static_cast<long>(d.pixels));
    gx.noalias() += w.transpose() * go;
  }
}

template <typename T>
void separable_apply(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw, const T* in, T* out) {
  CMapMat<T> h(rh.matrix.data(), static_cast<long>(rh.dst), static_cast<long>(rh.src));
  CMapMat<T> w(rw.matrix.data(), static_cast<long>(rw.dst), static_cast<long>(rw.src));
  const auto n = static_cast<long>(channels);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < n; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    CMapMat<T> x(in + cu * rh.src * rw.src, static_cast<long>(rh.src), static_cast<long>(rw.src));
    MapMat<T> o(out + cu * rh.dst * rw.dst, static_cast<long>(rh.dst), static_cast<long>(rw.dst));
    RowMat<T> tmp = h * x;
    o.noalias() = tmp * w.transpose();
  }
}

template <typename T>
void separable_apply_transpose(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw,
                               const T* grad_out, T* grad_in) {
  CMapMat<T> h(rh.matrix.data(), static_cast<long>(rh.dst), static_cast<long>(rh.src));
  CMapMat<T> w(rw.matrix.data(), static_cast<long>(rw.dst), static_cast<long>(rw.src));
  const auto n = static_cast<long>(channels);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < n; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    CMapMat<T> g(grad_out + cu * rh.dst * rw.dst, static_cast<long>(rh.dst), static_cast<long>(rw.dst));
    MapMat<T> gi(grad_in + cu * rh.src * rw.src, static_cast<long>(rh.src), static_cast<long>(rw.src));
    RowMat<T> tmp = h.transpose() * g;
    gi.noalias() += tmp * w;
  }
}

namespace {

template <typename T>
void gather_modes(const ModeBox& box, std::size_t channels, const std::complex<T>* spec, std::complex<T>* compact) {
  const std::size_t wh = box.half_w();
  const std::size_t m = box.modes();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < box.rows(); ++r) {
      const std::complex<T>* src = spec + (c * box.h + box.spectrum_row(r)) * wh;
      std::copy(src, src + box.cols(), compact + c * m + r * box.cols());
    }
  }
}

}  // namespace

template <typename T>
void spectral_mix_forward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                          const std::complex<T>* weights, const T* gate, std::complex<T>* acc,
                          std::complex<T>* out) {
  const std::size_t m = box.modes();
  const std::size_t wh = box.half_w();
  std::vector<std::complex<T>> vc(c_in * m);
  gather_modes(box, c_in, vhat, vc.data());
  const auto n_out = static_cast<long>(c_out);
#pragma omp parallel for schedule(static)
  for (long col = 0; col < n_out; ++col) {
    const auto co = static_cast<std::size_t>(col);
    std::complex<T>* a = acc + co * m;
    std::fill(a, a + m, std::complex<T>{});
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const std::complex<T>* wrow = weights + (co * c_in + ci) * m;
      const std::complex<T>* v = vc.data() + ci * m;
      for (std::size_t k = 0; k < m; ++k) a[k] += wrow[k] * v[k];
    }
    std::complex<T>* o = out + co * box.h * wh;
    std::fill(o, o + box.h * wh, std::complex<T>{});
    for (std::size_t r = 0; r < box.rows(); ++r) {
      std::complex<T>* orow = o + box.spectrum_row(r) * wh;
      for (std::size_t c = 0; c < box.cols(); ++c) {
        const std::size_t k = r * box.cols() + c;
        orow[c] = gate[k] * a[k];
      }
    }
  }
}

template <typename T>
void spectral_mix_backward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                           const std::complex<T>* weights, const T* gate, const std::complex<T>* acc,
                           const std::complex<T>* grad_out, std::complex<T>* grad_vhat,
                           std::complex<T>* grad_weights, T* grad_gate) {
  const std::size_t m = box.modes();
  const std::size_t wh = box.half_w();
  std::vector<std::complex<T>> go(c_out * m);
  gather_modes(box, c_out, grad_out, go.data());

  if (grad_gate != nullptr) {
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t k = 0; k < m; ++k) grad_gate[k] += std::real(go[co * m + k] * std::conj(acc[co * m + k]));
    }
  }
  // gradient w.r.t. the pre-gate accumulator
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t k = 0; k < m; ++k) go[co * m + k] *= gate[k];
  }
  if (grad_weights != nullptr) {
    std::vector<std::complex<T>> vc(c_in * m);
    gather_modes(box, c_in, vhat, vc.data());
    const auto n_out = static_cast<long>(c_out);
#pragma omp parallel for schedule(static)
    for (long col = 0; col < n_out; ++col) {
      const auto co = static_cast<std::size_t>(col);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        std::complex<T>* gw = grad_weights + (co * c_in + ci) * m;
        const std::complex<T>* v = vc.data() + ci * m;
        const std::complex<T>* g = go.data() + co * m;
        for (std::size_t k = 0; k < m; ++k) gw[k] += g[k] * std::conj(v[k]);
      }
    }
  }
  if (grad_vhat != nullptr) {
    const auto n_in = static_cast<long>(c_in);
#pragma omp parallel for schedule(static)
    for (long cil = 0; cil < n_in; ++cil) {
      const auto ci = static_cast<std::size_t>(cil);
      std::vector<std::complex<T>> gv(m);
      for (std::size_t co = 0; co < c_out; ++co) {
        const std::complex<T>* wrow = weights + (co * c_in + ci) * m;
        const std::complex<T>* g = go.data() + co * m;
        for (std::size_t k = 0; k < m; ++k) gv[k] += std::conj(wrow[k]) * g[k];
      }
      std::complex<T>* dst = grad_vhat + ci * box.h * wh;
      for (std::size_t r = 0; r < box.rows(); ++r) {
        std::complex<T>* drow = dst + box.spectrum_row(r) * wh;
        for (std::size_t c = 0; c < box.cols(); ++c) drow[c] += gv[r * box.cols() + c];
      }
    }
  }
}

namespace reference {

template <typename T>
void conv3x3_periodic_forward(const ConvDims& d, const T* in, const T* kernel, const T* bias, T* out) {
  for (std::size_t co = 0; co < d.c_out; ++co) {
    for (std::size_t i = 0; i < d.h; ++i) {
      for (std::size_t j = 0; j < d.w; ++j) {
        T s = bias[co];
        for (std::size_t ci = 0; ci < d.c_in; ++ci) {
          for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
              const std::size_t ii = (i + d.h + a - 1) % d.h;
              const std::size_t jj = (j + d.w + b - 1) % d.w;
              s += kernel[((co * d.c_in + ci) * 3 + a) * 3 + b] * in[(ci * d.h + ii) * d.w + jj];
            }
          }
        }
        out[(co * d.h + i) * d.w + j] = s;
      }
    }
  }
}

template <typename T>
void conv3x3_periodic_backward(const ConvDims& d, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                               T* grad_kernel, T* grad_bias) {
  for (std::size_t co = 0; co < d.c_out; ++co) {
    for (std::size_t i = 0; i < d.h; ++i) {
      for (std::size_t j = 0; j < d.w; ++j) {
        const T g = grad_out[(co * d.h + i) * d.w + j];
        if (grad_bias) grad_bias[co] += g;
        for (std::size_t ci = 0; ci < d.c_in; ++ci) {
          for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
              const std::size_t ii = (i + d.h + a - 1) % d.h;
              const std::size_t jj = (j + d.w + b - 1) % d.w;
              const std::size_t kidx = ((co * d.c_in + ci) * 3 + a) * 3 + b;
              const std::size_t xidx = (ci * d.h + ii) * d.w + jj;
              if (grad_kernel) grad_kernel[kidx] += g * in[xidx];
              if (grad_in) grad_in[xidx] += g * kernel[kidx];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void pointwise_forward(const PointwiseDims& d, const T* in, const T* weight, const T* bias, T* out) {
  for (std::size_t co = 0; co < d.c_out; ++co) {
    for (std::size_t p = 0; p < d.pixels; ++p) {
      T s = bias[co];
      for (std::size_t ci = 0; ci < d.c_in; ++ci) s += weight[co * d.c_in + ci] * in[ci * d.pixels + p];
      out[co * d.pixels + p] = s;
    }
  }
}

template <typename T>
void separable_apply(std::size_t channels, const Interp1D<T>& rh, const Interp1D<T>& rw, const T* in, T* out) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < rh.dst; ++i) {
      for (std::size_t j = 0; j < rw.dst; ++j) {
        T s{0};
        for (std::size_t p = 0; p < rh.src; ++p) {
          const T wh = rh.matrix[i * rh.src + p];
          if (wh == T{0}) continue;
          for (std::size_t q = 0; q < rw.src; ++q) {
            s += wh * rw.matrix[j * rw.src + q] * in[(c * rh.src + p) * rw.src + q];
          }
        }
        out[(c * rh.dst + i) * rw.dst + j] = s;
      }
    }
  }
}

template <typename T>
void spectral_mix_forward(const ModeBox& box, std::size_t c_in, std::size_t c_out, const std::complex<T>* vhat,
                          const std::complex<T>* weights, const T* gate, std::complex<T>* out) {
  const std::size_t wh = box.half_w();
  std::fill(out, out + c_out * box.h * wh, std::complex<T>{});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t r = 0; r < box.rows(); ++r) {
      for (std::size_t c = 0; c < box.cols(); ++c) {
        const std::size_t k = r * box.cols() + c;
        const std::size_t row = box.spectrum_row(r);
        std::complex<T> s{};
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          s += weights[(co * c_in + ci) * box.modes() + k] * vhat[(ci * box.h + row) * wh + c];
        }
        out[(co * box.h + row) * wh + c] = gate[k] * s;
      }
    }
  }
}

}  // namespace reference

#define SIMR_INSTANTIATE_KERNELS(T)                                                                              \
  template void conv3x3_periodic_forward<T>(const ConvDims&, const T*, const T*, const T*, T*);                  \
  template void conv3x3_periodic_backward<T>(const ConvDims&, const T*, const T*, const T*, T*, T*, T*);         \
  template void pointwise_forward<T>(const PointwiseDims&, const T*, const T*, const T*, T*);                    \
  template void pointwise_backward<T>(const PointwiseDims&, const T*, const T*, const T*, T*, T*, T*);           \
  template void separable_apply<T>(std::size_t, const Interp1D<T>&, const Interp1D<T>&, const T*, T*);           \
  template void separable_apply_transpose<T>(std::size_t, const Interp1D<T>&, const Interp1D<T>&, const T*, T*); \
  template void spectral_mix_forward<T>(const ModeBox&, std::size_t, std::size_t, const std::complex<T>*,        \
                                        const std::complex<T>*, const T*, std::complex<T>*, std::complex<T>*);   \
  template void spectral_mix_backward<T>(const ModeBox&, std::size_t, std::size_t, const std::complex<T>*,       \
                                         const std::complex<T>*, const T*, const std::complex<T>*,               \
                                         const std::complex<T>*, std::complex<T>*, std::complex<T>*, T*);        \
  template void reference::conv3x3_periodic_forward<T>(const ConvDims&, const T*, const T*, const T*, T*);       \
  template void reference::conv3x3_periodic_backward<T>(const ConvDims&, const T*, const T*, const T*, T*, T*,   \
                                                        T*);                                                     \
  template void reference::pointwise_forward<T>(const PointwiseDims&, const T*, const T*, const T*, T*);         \
  template void reference::separable_apply<T>(std::size_t, const Interp1D<T>&, const Interp1D<T>&, const T*,     \
                                              T*);                                                               \
  template void reference::spectral_mix_forward<T>(const ModeBox&, std::size_t, std::size_t,                     \
                                                   const std::complex<T>*, const std::complex<T>*, const T*,     \
                                                   std::complex<T>*);

SIMR_INSTANTIATE_KERNELS(float)
SIMR_INSTANTIATE_KERNELS(double)

}  // namespace simr::kernels
