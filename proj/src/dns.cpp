#include "simr/dns.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "simr/fft.hpp"
#include "simr/spectral.hpp"

namespace simr {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

int wave_y(std::size_t row, std::size_t n) {
  return row <= n / 2 ? static_cast<int>(row) : static_cast<int>(row) - static_cast<int>(n);
}

// Derivative multipliers vanish on the Nyquist row/column.
double deriv_x(std::size_t col, std::size_t n) { return col == n / 2 ? 0.0 : static_cast<double>(col); }
double deriv_y(std::size_t row, std::size_t n) { return row == n / 2 ? 0.0 : static_cast<double>(wave_y(row, n)); }

double column_weight(std::size_t col, std::size_t n) { return (col == 0 || col == n / 2) ? 1.0 : 2.0; }

SpectralField zeros_like(const SpectralField& s) { return SpectralField{s.n, std::vector<cd>(s.coeffs.size())}; }

void axpy(SpectralField& y, double a, const SpectralField& x) {
  for (std::size_t i = 0; i < y.coeffs.size(); ++i) y.coeffs[i] += a * x.coeffs[i];
}

bool all_finite(const SpectralField& s) {
  return std::all_of(s.coeffs.begin(), s.coeffs.end(),
                     [](const cd& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

}  // namespace

void SolverConfig::validate() const {
  if (!fft::is_power_of_two(n) || n < 8) throw ConfigError("solver.n must be a power of two >= 8");
  if (nu < 0.0) throw ConfigError("solver.nu must be non-negative");
  if (dt <= 0.0) throw ConfigError("solver.dt must be positive");
  if (k_f <= 0 || static_cast<std::size_t>(k_f) >= n / 2) throw ConfigError("solver.k_f out of range");
  if (n_snapshots == 0) throw ConfigError("solver.n_snapshots must be at least 1");
  if (spinup_time < 0.0) throw ConfigError("solver.spinup_time must be non-negative");
  if (sample_interval <= 0.0) throw ConfigError("solver.sample_interval must be positive");
  if (stationarity_window == 0) throw ConfigError("solver.stationarity_window must be positive");
}

nlohmann::json SolverConfig::to_json() const {
  return {{"n", n},
          {"nu", nu},
          {"amplitude", amplitude},
          {"k_f", k_f},
          {"dt", dt},
          {"dealias", dealias},
          {"spinup_time", spinup_time},
          {"sample_interval", sample_interval},
          {"n_snapshots", n_snapshots},
          {"seed", seed},
          {"stationarity_window", stationarity_window}};
}

SpectralField to_spectral(const Field2D& field) {
  if (field.rank() != 2 || field.dim(0) != field.dim(1)) {
    throw DimensionError("to_spectral: square rank-2 field required, got " + shape_str(field.shape()));
  }
  SpectralField s{field.dim(0), std::vector<cd>(field.dim(0) * (field.dim(0) / 2 + 1))};
  fft::r2c(field.data(), s.n, s.n, s.coeffs.data());
  return s;
}

Field2D to_physical(const SpectralField& spec) {
  Field2D out({spec.n, spec.n});
  fft::c2r(spec.coeffs.data(), spec.n, spec.n, out.data());
  const double norm = 1.0 / static_cast<double>(spec.n * spec.n);
  for (auto& v : out.values()) v *= norm;
  return out;
}

ForcingField make_forcing(const SolverConfig& cfg) {
  ForcingField f{SpectralField{cfg.n, std::vector<cd>(cfg.n * (cfg.n / 2 + 1))}};
  // A cos(k_f y) = (A/2)(e^{i k_f y} + e^{-i k_f y}); unnormalized coefficient n^2 A / 2
  const double c = cfg.amplitude * static_cast<double>(cfg.n * cfg.n) / 2.0;
  const auto kf = static_cast<std::size_t>(cfg.k_f);
  f.f_hat.at(kf, 0) = c;
  f.f_hat.at(cfg.n - kf, 0) = c;
  return f;
}

SpectralField poisson_solve(const SpectralField& omega_hat) {
  SpectralField psi = zeros_like(omega_hat);
  const std::size_t n = omega_hat.n;
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = wave_y(r, n);
    for (std::size_t c = 0; c < omega_hat.half(); ++c) {
      const double kx = static_cast<double>(c);
      const double k2 = kx * kx + ky * ky;
      psi.at(r, c) = k2 == 0.0 ? cd{} : -omega_hat.at(r, c) / k2;
    }
  }
  return psi;
}

std::pair<SpectralField, SpectralField> velocity_spectral(const SpectralField& omega_hat) {
  const SpectralField psi = poisson_solve(omega_hat);
  SpectralField u = zeros_like(omega_hat), v = zeros_like(omega_hat);
  const std::size_t n = omega_hat.n;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < omega_hat.half(); ++c) {
      u.at(r, c) = -kI * deriv_y(r, n) * psi.at(r, c);
      v.at(r, c) = kI * deriv_x(c, n) * psi.at(r, c);
    }
  }
  return {std::move(u), std::move(v)};
}

std::pair<Field2D, Field2D> velocity_from_vorticity(const SpectralField& omega_hat) {
  auto [u, v] = velocity_spectral(omega_hat);
  return {to_physical(u), to_physical(v)};
}

double kinetic_energy(const SpectralField& omega_hat) {
  const std::size_t n = omega_hat.n;
  const double norm = 1.0 / static_cast<double>(n * n);
  double e = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = wave_y(r, n);
    for (std::size_t c = 0; c < omega_hat.half(); ++c) {
      const double kx = static_cast<double>(c);
      const double k2 = kx * kx + ky * ky;
      if (k2 == 0.0) continue;
      e += column_weight(c, n) * std::norm(omega_hat.at(r, c) * norm) / k2;
    }
  }
  return 0.5 * e;
}

double enstrophy(const SpectralField& omega_hat) {
  const std::size_t n = omega_hat.n;
  const double norm = 1.0 / static_cast<double>(n * n);
  double z = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < omega_hat.half(); ++c) z += column_weight(c, n) * std::norm(omega_hat.at(r, c) * norm);
  }
  return 0.5 * z;
}

SpectralField rhs(const FlowState& state, const SolverConfig& cfg, const ForcingField& forcing) {
  const SpectralField& w = state.omega_hat;
  if (!all_finite(w)) throw IntegrationDiverged("non-finite vorticity", state.time);
  const std::size_t n = w.n;
  if (forcing.f_hat.n != n) throw DimensionError("forcing grid does not match state grid");

  auto [uh, vh] = velocity_spectral(w);
  SpectralField wx = zeros_like(w), wy = zeros_like(w);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < w.half(); ++c) {
      wx.at(r, c) = kI * deriv_x(c, n) * w.at(r, c);
      wy.at(r, c) = kI * deriv_y(r, n) * w.at(r, c);
    }
  }
  const Field2D u = to_physical(uh), v = to_physical(vh), dwx = to_physical(wx), dwy = to_physical(wy);
  Field2D adv({n, n});
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = u[i] * dwx[i] + v[i] * dwy[i];
  SpectralField adv_hat = to_spectral(adv);

  const double cutoff = (2.0 / 3.0) * (static_cast<double>(n) / 2.0);
  SpectralField out = zeros_like(w);
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = wave_y(r, n);
    for (std::size_t c = 0; c < w.half(); ++c) {
      const double kx = static_cast<double>(c);
      const bool keep = !cfg.dealias || (std::abs(kx) <= cutoff && std::abs(ky) <= cutoff);
      const cd a = keep ? adv_hat.at(r, c) : cd{};
      out.at(r, c) = -a - cfg.nu * (kx * kx + ky * ky) * w.at(r, c) + forcing.f_hat.at(r, c);
    }
  }
  out.at(0, 0) = cd{};
  return out;
}

FlowState step_rk4(const FlowState& state, const SolverConfig& cfg, const ForcingField& forcing) {
  if (cfg.dt <= 0.0) throw ConfigError("dt must be positive");
  const double dt = cfg.dt;
  const auto stage = [&](const SpectralField& base, double a, const SpectralField& k, double t) {
    FlowState s{base, t};
    axpy(s.omega_hat, a, k);
    return s;
  };
  const SpectralField k1 = rhs(state, cfg, forcing);
  const SpectralField k2 = rhs(stage(state.omega_hat, dt / 2, k1, state.time + dt / 2), cfg, forcing);
  const SpectralField k3 = rhs(stage(state.omega_hat, dt / 2, k2, state.time + dt / 2), cfg, forcing);
  const SpectralField k4 = rhs(stage(state.omega_hat, dt, k3, state.time + dt), cfg, forcing);

  FlowState next{state.omega_hat, state.time + dt};
  axpy(next.omega_hat, dt / 6, k1);
  axpy(next.omega_hat, dt / 3, k2);
  axpy(next.omega_hat, dt / 3, k3);
  axpy(next.omega_hat, dt / 6, k4);
  next.omega_hat.at(0, 0) = cd{};

  if (!all_finite(next.omega_hat)) throw IntegrationDiverged("non-finite vorticity after RK4 step", next.time);
  // sum of |coefficients| / n^2 bounds the sup norm of omega
  double bound = 0.0;
  const double norm = 1.0 / static_cast<double>(cfg.n * cfg.n);
  for (std::size_t r = 0; r < cfg.n; ++r) {
    for (std::size_t c = 0; c < next.omega_hat.half(); ++c) {
      bound += column_weight(c, cfg.n) * std::abs(next.omega_hat.at(r, c)) * norm;
    }
  }
  if (bound > 1e6) {
    const double sup = [&] {
      const Field2D w = to_physical(next.omega_hat);
      double m = 0.0;
      for (double x : w.values()) m = std::max(m, std::abs(x));
      return m;
    }();
    if (sup > 1e6) throw IntegrationDiverged("vorticity sup norm exceeded 1e6", next.time);
  }
  return next;
}

FlowState random_initial_state(std::size_t n, std::uint64_t seed) {
  UniformStream rng(seed);
  SpectralField s{n, std::vector<cd>(n * (n / 2 + 1))};
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = wave_y(r, n);
    for (std::size_t c = 0; c < s.half(); ++c) {
      const double k = std::hypot(static_cast<double>(c), ky);
      const double re = rng.next(-1.0, 1.0);
      const double im = rng.next(-1.0, 1.0);
      if (k >= 1.0 && k <= 6.0) s.at(r, c) = cd{re, im};
    }
  }
  Field2D w = to_physical(s);
  double mean = 0.0;
  for (double x : w.values()) mean += x;
  mean /= static_cast<double>(w.size());
  double ss = 0.0;
  for (double& x : w.values()) {
    x -= mean;
    ss += x * x;
  }
  const double rms = std::sqrt(ss / static_cast<double>(w.size()));
  for (double& x : w.values()) x /= rms;
  FlowState st{to_spectral(w), 0.0};
  st.omega_hat.at(0, 0) = cd{};
  return st;
}

StationarityReport check_stationarity(const std::vector<double>& energy, std::size_t window, double threshold) {
  StationarityReport rep;
  if (window == 0) return rep;
  for (std::size_t start = 0; start + window <= energy.size(); start += window) {
    double s = 0.0;
    for (std::size_t i = start; i < start + window; ++i) s += energy[i];
    rep.window_means.push_back(s / static_cast<double>(window));
  }
  if (rep.window_means.size() < 2) {
    rep.drift = 0.0;
    rep.stationary = !rep.window_means.empty();
    return rep;
  }
  double mean = 0.0;
  for (double m : rep.window_means) mean += m;
  mean /= static_cast<double>(rep.window_means.size());
  double var = 0.0;
  for (double m : rep.window_means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(rep.window_means.size());
  rep.drift = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  rep.stationary = rep.drift < threshold;
  return rep;
}

DnsResult generate_dataset(const SolverConfig& cfg) {
  cfg.validate();
  const ForcingField forcing = make_forcing(cfg);
  FlowState state = random_initial_state(cfg.n, cfg.seed);
  const auto spinup_steps = static_cast<std::size_t>(std::llround(cfg.spinup_time / cfg.dt));
  const auto interval_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sample_interval / cfg.dt)));
  const double dx = 2.0 * std::numbers::pi / static_cast<double>(cfg.n);

  DnsResult res;
  res.dataset.n = cfg.n_snapshots;
  res.dataset.h = res.dataset.w = cfg.n;
  res.dataset.fields.reserve(cfg.n_snapshots * cfg.n * cfg.n);

  std::size_t sampling_start = 0;
  const auto record = [&](const FlowState& s) {
    res.energy.push_back(kinetic_energy(s.omega_hat));
    res.time.push_back(s.time);
  };
  const auto advance = [&](std::size_t steps) {
    for (std::size_t i = 0; i < steps; ++i) {
      state = step_rk4(state, cfg, forcing);
      record(state);
    }
  };
  const auto snapshot = [&]() {
    const Field2D w = to_physical(state.omega_hat);
    for (double x : w.values()) res.dataset.fields.push_back(static_cast<float>(x));
    auto [u, v] = velocity_from_vorticity(state.omega_hat);
    double umax = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) umax = std::max({umax, std::abs(u[i]), std::abs(v[i])});
    res.cfl_max = std::max(res.cfl_max, umax * cfg.dt / dx);
  };

  record(state);
  advance(spinup_steps);
  sampling_start = res.energy.size() - 1;
  snapshot();
  for (std::size_t s = 1; s < cfg.n_snapshots; ++s) {
    advance(interval_steps);
    snapshot();
  }

  const std::vector<double> window(res.energy.begin() + static_cast<long>(sampling_start), res.energy.end());
  res.stationarity = check_stationarity(window, cfg.stationarity_window);

  auto& meta = res.dataset.metadata;
  meta["solver"] = cfg.to_json();
  meta["integrator"] = "rk4";
  meta["forcing"] = "amplitude * cos(k_f * y), y along rows";
  meta["layout"] = "row-major [snapshot][y][x] on (0, 2pi)^2";
  meta["cfl_max"] = res.cfl_max;
  meta["stationarity"] = {{"window_steps", cfg.stationarity_window},
                          {"drift", res.stationarity.drift},
                          {"stationary", res.stationarity.stationary}};
  if (!res.stationarity.stationary) {
    meta["warnings"] = nlohmann::json::array({"windowed-mean energy drift exceeds 10% over the sampling window"});
  }
  return res;
}

}  // namespace simr
