#include "doctest.h"

#include <cmath>

#include "simr/dns.hpp"
#include "support.hpp"

using namespace simr;
using simr::testing::max_abs_diff;
using simr::testing::sample_field;

TEST_CASE("spectral roundtrip") {
  auto w = simr::testing::random_tensor({32, 32}, 1);
  CHECK(max_abs_diff(to_physical(to_spectral(w)), w) < 1e-13);
  CHECK_THROWS_AS(to_spectral(Field2D({16, 8})), DimensionError);
}

TEST_CASE("Poisson solve of sin x") {
  const std::size_t n = 32;
  auto omega = sample_field(n, [](double x, double) { return std::sin(x); });
  auto psi = to_physical(poisson_solve(to_spectral(omega)));
  auto expect = sample_field(n, [](double x, double) { return -std::sin(x); });
  CHECK(max_abs_diff(psi, expect) < 1e-12);

  auto mixed = sample_field(n, [](double x, double y) { return std::cos(2 * x + 3 * y); });
  auto psi2 = to_physical(poisson_solve(to_spectral(mixed)));
  auto expect2 = sample_field(n, [](double x, double y) { return -std::cos(2 * x + 3 * y) / 13.0; });
  CHECK(max_abs_diff(psi2, expect2) < 1e-12);
}

TEST_CASE("velocity of sin y is (cos y, 0)") {
  const std::size_t n = 32;
  auto omega = sample_field(n, [](double, double y) { return std::sin(y); });
  auto [u, v] = velocity_from_vorticity(to_spectral(omega));
  auto expect = sample_field(n, [](double, double y) { return std::cos(y); });
  CHECK(max_abs_diff(u, expect) < 1e-12);
  CHECK(simr::testing::max_abs(v) < 1e-12);
}

TEST_CASE("velocity is divergence free and has vorticity omega") {
  const std::size_t n = 32;
  auto s = random_initial_state(n, 3).omega_hat;
  auto [uh, vh] = velocity_spectral(s);
  double div = 0.0, curl = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double ky = r <= n / 2 ? static_cast<double>(r) : static_cast<double>(r) - static_cast<double>(n);
    for (std::size_t c = 0; c < s.half(); ++c) {
      if (r == n / 2 || c == n / 2) continue;
      const std::complex<double> i{0.0, 1.0};
      const double kx = static_cast<double>(c);
      div = std::max(div, std::abs(i * kx * uh.at(r, c) + i * ky * vh.at(r, c)));
      curl = std::max(curl, std::abs(i * kx * vh.at(r, c) - i * ky * uh.at(r, c) - s.at(r, c)));
    }
  }
  CHECK(div < 1e-9);
  CHECK(curl < 1e-9);
}

TEST_CASE("energy and enstrophy of sin y") {
  auto omega = to_spectral(sample_field(64, [](double, double y) { return std::sin(y); }));
  CHECK(kinetic_energy(omega) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(enstrophy(omega) == doctest::Approx(0.25).epsilon(1e-12));
  auto omega3 = to_spectral(sample_field(64, [](double x, double) { return std::cos(3 * x); }));
  CHECK(kinetic_energy(omega3) == doctest::Approx(0.25 / 9.0).epsilon(1e-12));
}

TEST_CASE("forcing is A cos(k_f y)") {
  SolverConfig cfg;
  cfg.n = 32;
  cfg.amplitude = 0.7;
  cfg.k_f = 4;
  auto f = to_physical(make_forcing(cfg).f_hat);
  auto expect = sample_field(32, [](double, double y) { return 0.7 * std::cos(4 * y); });
  CHECK(max_abs_diff(f, expect) < 1e-12);
}

TEST_CASE("single-mode viscous decay") {
  SolverConfig cfg;
  cfg.n = 32;
  cfg.nu = 0.05;
  cfg.amplitude = 0.0;
  cfg.dt = 0.01;
  auto forcing = make_forcing(cfg);
  FlowState state{to_spectral(sample_field(32, [](double x, double) { return std::cos(x); })), 0.0};
  const double decay = std::exp(-cfg.nu * cfg.dt);
  double worst = 0.0;
  for (int step = 0; step < 100; ++step) {
    auto next = step_rk4(state, cfg, forcing);
    const double ratio = std::abs(next.omega_hat.at(0, 1)) / std::abs(state.omega_hat.at(0, 1));
    worst = std::max(worst, std::abs(ratio - decay) / decay);
    state = next;
  }
  CHECK(worst < 1e-6);
  CHECK(std::abs(state.omega_hat.at(0, 1)) / (32.0 * 32.0 / 2.0) == doctest::Approx(std::exp(-0.05)).epsilon(1e-8));
}

TEST_CASE("unforced enstrophy never increases") {
  SolverConfig cfg;
  cfg.n = 32;
  cfg.nu = 1e-3;
  cfg.amplitude = 0.0;
  cfg.dt = 0.01;
  auto forcing = make_forcing(cfg);
  auto state = random_initial_state(cfg.n, 4);
  double z = enstrophy(state.omega_hat);
  for (int step = 0; step < 50; ++step) {
    state = step_rk4(state, cfg, forcing);
    const double next = enstrophy(state.omega_hat);
    CHECK(next <= z);
    z = next;
  }
}

TEST_CASE("random initial state") {
  auto a = random_initial_state(32, 9), b = random_initial_state(32, 9), c = random_initial_state(32, 10);
  CHECK(a.omega_hat.coeffs == b.omega_hat.coeffs);
  CHECK(a.omega_hat.coeffs != c.omega_hat.coeffs);
  auto w = to_physical(a.omega_hat);
  double mean = 0.0, ss = 0.0;
  for (double v : w.values()) {
    mean += v;
    ss += v * v;
  }
  CHECK(std::abs(mean / 1024.0) < 1e-12);
  CHECK(std::sqrt(ss / 1024.0) == doctest::Approx(1.0).epsilon(1e-12));
  double outside = 0.0;
  for (std::size_t r = 0; r < 32; ++r) {
    const double ky = r <= 16 ? static_cast<double>(r) : static_cast<double>(r) - 32.0;
    for (std::size_t col = 0; col < 17; ++col) {
      if (std::hypot(static_cast<double>(col), ky) > 6.0) outside = std::max(outside, std::abs(a.omega_hat.at(r, col)));
    }
  }
  CHECK(outside < 1e-10);
}

TEST_CASE("stationarity check") {
  std::vector<double> flat(1000, 2.0), ramp(1000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 1.0 + static_cast<double>(i) / 100.0;
  auto a = check_stationarity(flat, 100);
  CHECK(a.stationary);
  CHECK(a.window_means.size() == 10);
  CHECK(a.drift == 0.0);
  auto b = check_stationarity(ramp, 100);
  CHECK_FALSE(b.stationary);
  CHECK(b.drift > 0.1);
}

TEST_CASE("runaway integration is reported") {
  SolverConfig cfg;
  cfg.n = 16;
  cfg.nu = 0.0;
  cfg.dt = 50.0;
  auto forcing = make_forcing(cfg);
  auto state = random_initial_state(cfg.n, 1);
  for (auto& c : state.omega_hat.coeffs) c *= 100.0;
  bool thrown = false;
  try {
    for (int i = 0; i < 50; ++i) state = step_rk4(state, cfg, forcing);
  } catch (const IntegrationDiverged& e) {
    thrown = true;
    CHECK(e.time() > 0.0);
  }
  CHECK(thrown);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n = 48;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SolverConfig{};
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SolverConfig{};
  cfg.k_f = 64;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("small dataset generation") {
  SolverConfig cfg;
  cfg.n = 16;
  cfg.nu = 0.05;
  cfg.dt = 0.05;
  cfg.spinup_time = 1.0;
  cfg.sample_interval = 0.5;
  cfg.n_snapshots = 4;
  cfg.stationarity_window = 5;
  auto res = generate_dataset(cfg);
  CHECK(res.dataset.n == 4);
  CHECK(res.dataset.fields.size() == 4 * 256);
  CHECK(res.energy.size() == 1 + 20 + 3 * 10);
  CHECK(res.time.back() == doctest::Approx(2.5));
  CHECK(res.dataset.metadata.at("solver").at("n") == 16);
  CHECK(res.cfl_max > 0.0);
  auto again = generate_dataset(cfg);
  CHECK(again.dataset.fields == res.dataset.fields);
}
