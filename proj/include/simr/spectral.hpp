#pragma once

// Wavenumber bookkeeping and the radially gated Fourier convolution.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "simr/autodiff.hpp"
#include "simr/kernels.hpp"

namespace simr {

/// Integer wavenumbers of an h x (w/2+1) half spectrum in rfft2 order.
struct WavenumberGrid {
  static constexpr double kEps = 1e-12;

  std::size_t h = 0, w = 0;
  std::vector<int> kx;       // w/2+1 entries: 0..w/2
  std::vector<int> ky;       // h entries: 0..h/2, -h/2+1..-1
  std::vector<double> rho;   // |k|_2 / (max |k|_2 + eps), row-major h x (w/2+1)
  double max_norm = 0.0;

  std::size_t half_w() const { return w / 2 + 1; }
  double rho_at(std::size_t row, std::size_t col) const { return rho[row * half_w() + col]; }

  /// rho for the retained modes of a k_max truncation, in ModeBox order.
  std::vector<double> retained_rho(std::size_t k_max) const;
};

WavenumberGrid build_wavenumber_grid(std::size_t h, std::size_t w);

/// Two-layer gate MLP acting on the scalar rho; hidden width 32.
template <typename T>
struct GateMLP {
  static constexpr std::size_t kHidden = 32;
  Var<T> a1;  // [32,1]
  Var<T> b1;  // [32]
  Var<T> a2;  // [1,32]
  Var<T> b2;  // [1]
};

/// Learned complex multipliers for retained modes, [d_out, d_in, 2 k_max, k_max+1, 2].
template <typename T>
struct SpectralWeights {
  Var<T> w;
  std::size_t k_max = 0;
};

/// Deterministic uniform stream used for all parameter initialisation.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed);
  /// Uniform in [lo, hi).
  double next(double lo, double hi);

 private:
  std::uint64_t state_;
};

template <typename T>
GateMLP<T> make_gate(UniformStream& rng);

template <typename T>
SpectralWeights<T> make_spectral_weights(std::size_t d_in, std::size_t d_out, std::size_t k_max, UniformStream& rng);

/// sigmoid(A2 gelu(A1 rho + b1) + b2) for every entry of rho ([M] -> [M]).
template <typename T>
Var<T> gate_eval(Tape<T>& tape, const GateMLP<T>& gate, const Var<T>& rho);

/// y(k) = gate(k) * W(k) vhat(k) on retained modes, zero elsewhere.
/// vhat [C_in,H,W/2+1,2], gate [modes] -> [C_out,H,W/2+1,2]
template <typename T>
Var<T> spectral_mix(Tape<T>& tape, const Var<T>& vhat, const SpectralWeights<T>& weights, const Var<T>& gate,
                    std::size_t h, std::size_t w);

/// irfft2( g(rho) W vhat ) with g from the gate MLP; pass gate == nullptr for
/// the ungated convolution (g = 1).
template <typename T>
Var<T> gated_spectral_conv(Tape<T>& tape, const Var<T>& v, const SpectralWeights<T>& weights, const GateMLP<T>* gate,
                           const WavenumberGrid& grid);

/// Throws ConfigError when k_max does not fit an h x w field.
void check_k_max(std::size_t k_max, std::size_t h, std::size_t w);

}  // namespace simr
