#pragma once

// Pseudo-spectral DNS of Kolmogorov-forced 2D turbulence in vorticity form
//   d(omega)/dt + u.grad(omega) = nu lap(omega) + A cos(k_f y)
// on (0, 2pi)^2. Row index is y, column index is x. Spectral fields use the
// unnormalized rfft2 convention (coefficient = n^2 times the Fourier-series
// coefficient).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "simr/data.hpp"
#include "simr/tensor.hpp"

namespace simr {

using Field2D = Tensor<double>;

struct SpectralField {
  std::size_t n = 0;
  std::vector<std::complex<double>> coeffs;  // n x (n/2+1)

  std::size_t half() const { return n / 2 + 1; }
  std::complex<double>& at(std::size_t row, std::size_t col) { return coeffs[row * half() + col]; }
  const std::complex<double>& at(std::size_t row, std::size_t col) const { return coeffs[row * half() + col]; }
};

struct FlowState {
  SpectralField omega_hat;
  double time = 0.0;
};

struct SolverConfig {
  std::size_t n = 128;
  double nu = 1e-3;
  double amplitude = 1.0;
  int k_f = 4;
  double dt = 0.01;
  bool dealias = true;
  double spinup_time = 50.0;
  double sample_interval = 1.0;
  std::size_t n_snapshots = 1001;
  std::uint64_t seed = 0;
  // Steps per window for the windowed-mean stationarity check.
  std::size_t stationarity_window = 100;

  void validate() const;
  nlohmann::json to_json() const;
};

struct ForcingField {
  SpectralField f_hat;
};

SpectralField to_spectral(const Field2D& field);
Field2D to_physical(const SpectralField& spec);

ForcingField make_forcing(const SolverConfig& cfg);

SpectralField poisson_solve(const SpectralField& omega_hat);

/// Spectral velocity (u_hat, v_hat) = (-i ky psi_hat, i kx psi_hat).
std::pair<SpectralField, SpectralField> velocity_spectral(const SpectralField& omega_hat);
std::pair<Field2D, Field2D> velocity_from_vorticity(const SpectralField& omega_hat);

/// Domain-mean kinetic energy 1/2 <|u|^2> and enstrophy 1/2 <omega^2>.
double kinetic_energy(const SpectralField& omega_hat);
double enstrophy(const SpectralField& omega_hat);

SpectralField rhs(const FlowState& state, const SolverConfig& cfg, const ForcingField& forcing);

FlowState step_rk4(const FlowState& state, const SolverConfig& cfg, const ForcingField& forcing);

/// Random vorticity with content in shells 1 <= |k| <= 6, unit RMS, zero mean.
FlowState random_initial_state(std::size_t n, std::uint64_t seed);

struct StationarityReport {
  std::vector<double> window_means;
  double drift = 0.0;  // std / mean of window means
  bool stationary = false;
};

/// Windowed-mean energy check over a series (one value per step).
StationarityReport check_stationarity(const std::vector<double>& energy, std::size_t window, double threshold = 0.1);

struct DnsResult {
  SnapshotDataset dataset;
  std::vector<double> energy;  // per step, whole run
  std::vector<double> time;
  StationarityReport stationarity;
  double cfl_max = 0.0;
};

/// Spin up, then record n_snapshots fields spaced sample_interval apart.
DnsResult generate_dataset(const SolverConfig& cfg);

}  // namespace simr
