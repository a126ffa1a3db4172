#include "simr/spectral.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "simr/ops.hpp"

namespace simr {

WavenumberGrid build_wavenumber_grid(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("wavenumber grid needs even sizes, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  WavenumberGrid g;
  g.h = h;
  g.w = w;
  for (std::size_t c = 0; c <= w / 2; ++c) g.kx.push_back(static_cast<int>(c));
  for (std::size_t r = 0; r < h; ++r) {
    g.ky.push_back(r <= h / 2 ? static_cast<int>(r) : static_cast<int>(r) - static_cast<int>(h));
  }
  std::vector<double> norm(h * g.half_w());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < g.half_w(); ++c) {
      const double n = std::hypot(static_cast<double>(g.kx[c]), static_cast<double>(g.ky[r]));
      norm[r * g.half_w() + c] = n;
      g.max_norm = std::max(g.max_norm, n);
    }
  }
  g.rho.resize(norm.size());
  for (std::size_t i = 0; i < norm.size(); ++i) g.rho[i] = norm[i] / (g.max_norm + WavenumberGrid::kEps);
  return g;
}

std::vector<double> WavenumberGrid::retained_rho(std::size_t k_max) const {
  check_k_max(k_max, h, w);
  const kernels::ModeBox box{h, w, k_max};
  std::vector<double> out;
  out.reserve(box.modes());
  for (std::size_t r = 0; r < box.rows(); ++r) {
    for (std::size_t c = 0; c < box.cols(); ++c) out.push_back(rho_at(box.spectrum_row(r), c));
  }
  return out;
}

void check_k_max(std::size_t k_max, std::size_t h, std::size_t w) {
  if (k_max == 0 || k_max > std::min(h, w) / 2) {
    throw ConfigError("k_max = " + std::to_string(k_max) + " must lie in [1, " + std::to_string(std::min(h, w) / 2) +
                      "] for a " + std::to_string(h) + "x" + std::to_string(w) + " field");
  }
}

UniformStream::UniformStream(std::uint64_t seed) : state_(seed) {}

double UniformStream::next(double lo, double hi) {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, UniformStream& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.next(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
GateMLP<T> make_gate(UniformStream& rng) {
  constexpr std::size_t hidden = GateMLP<T>::kHidden;
  GateMLP<T> g;
  g.a1 = Var<T>::parameter(uniform_tensor<T>({hidden, 1}, 1.0, rng));
  g.b1 = Var<T>::parameter(Tensor<T>({hidden}));
  g.a2 = Var<T>::parameter(uniform_tensor<T>({1, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
  g.b2 = Var<T>::parameter(Tensor<T>({1}));
  return g;
}

template <typename T>
SpectralWeights<T> make_spectral_weights(std::size_t d_in, std::size_t d_out, std::size_t k_max, UniformStream& rng) {
  const double bound = 1.0 / static_cast<double>(d_in * d_out);
  SpectralWeights<T> sw;
  sw.k_max = k_max;
  sw.w = Var<T>::parameter(uniform_tensor<T>({d_out, d_in, 2 * k_max, k_max + 1, 2}, bound, rng));
  return sw;
}

template <typename T>
Var<T> gate_eval(Tape<T>& tape, const GateMLP<T>& gate, const Var<T>& rho) {
  const std::size_t m = rho.size();
  auto x = reshape(tape, rho, {1, m, 1});
  auto hidden = gelu(tape, pointwise_linear(tape, x, gate.a1, gate.b1));
  auto out = sigmoid(tape, pointwise_linear(tape, hidden, gate.a2, gate.b2));
  return reshape(tape, out, {m});
}

template <typename T>
Var<T> spectral_mix(Tape<T>& tape, const Var<T>& vhat, const SpectralWeights<T>& weights, const Var<T>& gate,
                    std::size_t h, std::size_t w) {
  const auto& vs = vhat.shape();
  const auto& ws = weights.w.shape();
  if (vs.size() != 4 || vs[1] != h || vs[2] != w / 2 + 1 || vs[3] != 2) {
    throw DimensionError("spectral_mix: spectrum shape " + shape_str(vs) + " does not match a " + std::to_string(h) +
                         "x" + std::to_string(w) + " field");
  }
  check_k_max(weights.k_max, h, w);
  const kernels::ModeBox box{h, w, weights.k_max};
  if (ws.size() != 5 || ws[1] != vs[0] || ws[2] != box.rows() || ws[3] != box.cols() || ws[4] != 2) {
    throw DimensionError("spectral_mix: weight shape " + shape_str(ws) + " incompatible with input channels " +
                         std::to_string(vs[0]) + " and k_max " + std::to_string(weights.k_max));
  }
  if (gate.size() != box.modes()) {
    throw DimensionError("spectral_mix: gate has " + std::to_string(gate.size()) + " entries, expected " +
                         std::to_string(box.modes()));
  }
  const std::size_t c_in = vs[0], c_out = ws[0];
  Tensor<T> out({c_out, h, w / 2 + 1, 2});
  Tensor<T> acc({c_out, box.modes(), 2});
  const auto cx = [](const Tensor<T>& t) { return reinterpret_cast<const std::complex<T>*>(t.data()); };
  const auto mx = [](Tensor<T>& t) { return reinterpret_cast<std::complex<T>*>(t.data()); };
  kernels::spectral_mix_forward(box, c_in, c_out, cx(vhat.value()), cx(weights.w.value()), gate.value().data(),
                                mx(acc), mx(out));
  Var<T> wv = weights.w;
  return tape.emit(std::move(out), {vhat, wv, gate},
                   [vhat, wv, gate, box, c_in, c_out, acc = std::move(acc), cx, mx](const Tensor<T>& g) {
                     kernels::spectral_mix_backward(
                         box, c_in, c_out, cx(vhat.value()), cx(wv.value()), gate.value().data(), cx(acc), cx(g),
                         vhat.requires_grad() ? mx(vhat.grad_buffer()) : nullptr,
                         wv.requires_grad() ? mx(wv.grad_buffer()) : nullptr,
                         gate.requires_grad() ? gate.grad_buffer().data() : nullptr);
                   });
}

template <typename T>
Var<T> gated_spectral_conv(Tape<T>& tape, const Var<T>& v, const SpectralWeights<T>& weights, const GateMLP<T>* gate,
                           const WavenumberGrid& grid) {
  if (v.shape().size() != 3 || v.shape()[1] != grid.h || v.shape()[2] != grid.w) {
    throw DimensionError("gated_spectral_conv: input " + shape_str(v.shape()) + " does not match grid " +
                         std::to_string(grid.h) + "x" + std::to_string(grid.w));
  }
  const auto rho_values = grid.retained_rho(weights.k_max);
  Var<T> g;
  if (gate != nullptr) {
    Tensor<T> rho({rho_values.size()});
    for (std::size_t i = 0; i < rho_values.size(); ++i) rho[i] = static_cast<T>(rho_values[i]);
    g = gate_eval(tape, *gate, Var<T>::constant(std::move(rho)));
  } else {
    g = Var<T>::constant(Tensor<T>({rho_values.size()}, T{1}));
  }
  auto vhat = rfft2(tape, v);
  auto yhat = spectral_mix(tape, vhat, weights, g, grid.h, grid.w);
  return irfft2(tape, yhat, grid.w);
}

#define SIMR_INSTANTIATE_SPECTRAL(T)                                                                             \
  template GateMLP<T> make_gate<T>(UniformStream&);                                                              \
  template SpectralWeights<T> make_spectral_weights<T>(std::size_t, std::size_t, std::size_t, UniformStream&);   \
  template Var<T> gate_eval<T>(Tape<T>&, const GateMLP<T>&, const Var<T>&);                                      \
  template Var<T> spectral_mix<T>(Tape<T>&, const Var<T>&, const SpectralWeights<T>&, const Var<T>&,             \
                                  std::size_t, std::size_t);                                                     \
  template Var<T> gated_spectral_conv<T>(Tape<T>&, const Var<T>&, const SpectralWeights<T>&, const GateMLP<T>*,  \
                                         const WavenumberGrid&);

SIMR_INSTANTIATE_SPECTRAL(float)
SIMR_INSTANTIATE_SPECTRAL(double)

}  // namespace simr
