// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion.
//
//   simr_acceptance --config configs/desk.json --work <dir> [--only 1,2,3] [--keep]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simr/diagnostics.hpp"
#include "simr/dns.hpp"
#include "simr/harness.hpp"
#include "simr/model.hpp"
#include "simr/ops.hpp"
#include "simr/spectral.hpp"
#include "simr/train.hpp"
#include "support.hpp"

using namespace simr;
using simr::testing::max_abs;
using simr::testing::max_abs_diff;
using simr::testing::probe_loss;
using simr::testing::random_tensor;
using simr::testing::sample_field;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failed_.push_back(what);
  }
  bool ok() const { return failed_.empty(); }
  std::string summary() const {
    std::string s = std::to_string(total_ - failed_.size()) + "/" + std::to_string(total_) + " checks";
    for (const auto& f : failed_) s += "; failed: " + f;
    return s;
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failed_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_line(int id, const std::string& status, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, status.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::complex<double> spec_at(const Tensor<double>& s, std::size_t c, std::size_t r, std::size_t k) {
  const auto h = s.shape()[1], hw = s.shape()[2];
  const std::size_t base = ((c * h + r) * hw + k) * 2;
  return {s[base], s[base + 1]};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

bool property_suite(std::string& detail) {
  Checks c;
  Tape<double> tape(Tape<double>::Mode::inference);

  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{32, 32}, {16, 64}}) {
    auto x = random_tensor({2, h, w}, 1);
    auto spec = rfft2(tape, Var<double>::constant(x));
    auto back = irfft2(tape, spec, w).value();
    c.expect(max_abs_diff(back, x) <= 1e-12 * std::max(1.0, max_abs(x)), "fft roundtrip");
    double phys = 0.0, fourier = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) phys += x[i] * x[i];
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t k = 0; k <= w / 2; ++k) {
        fourier += ((k == 0 || k == w / 2) ? 1.0 : 2.0) * std::norm(spec_at(spec.value(), 0, r, k));
      }
    }
    c.expect(rel(fourier / static_cast<double>(h * w), phys) <= 1e-12, "Plancherel");
  }

  const std::size_t n = 32;
  {
    auto psi = to_physical(poisson_solve(to_spectral(sample_field(n, [](double x, double) { return std::sin(x); }))));
    auto expect = sample_field(n, [](double x, double) { return -std::sin(x); });
    c.expect(max_abs_diff(psi, expect) < 1e-12, "Poisson sin x");
    auto [u, v] = velocity_from_vorticity(to_spectral(sample_field(n, [](double, double y) { return std::sin(y); })));
    c.expect(max_abs_diff(u, sample_field(n, [](double, double y) { return std::cos(y); })) < 1e-12, "velocity u");
    c.expect(max_abs(v) < 1e-12, "velocity v");
  }
  {
    auto omega = sample_field(n, [](double, double y) { return std::sin(y); });
    auto e = energy_spectrum(omega), z = enstrophy_spectrum(omega);
    c.expect(std::abs(e.values.at(0) - 0.25) < 1e-12 && std::abs(z.values.at(0) - 0.25) < 1e-12, "E(1)=Z(1)=1/4");
    auto ring = sample_field(n, [](double x, double y) { return std::sin(3 * x) + std::cos(4 * x - 3 * y) + std::sin(2 * y); });
    auto er = energy_spectrum(ring), zr = enstrophy_spectrum(ring);
    bool ok = true;
    for (std::size_t i = 0; i < er.k.size(); ++i) {
      const double k2 = static_cast<double>(er.k[i]) * er.k[i];
      ok = ok && std::abs(zr.values[i] - k2 * er.values[i]) <= 1e-10 * std::max(zr.values[i], 1e-14);
    }
    c.expect(ok, "Z(k)=k^2 E(k)");
  }

  {
    UniformStream rng(3);
    const std::size_t h = 32, w = 32, k_max = 6;
    auto weights = make_spectral_weights<double>(2, 3, k_max, rng);
    auto gate = make_gate<double>(rng);
    auto grid = build_wavenumber_grid(h, w);
    auto x = random_tensor({2, h, w}, 4);
    auto y = gated_spectral_conv(tape, Var<double>::constant(x), weights, &gate, grid);
    auto sy = rfft2(tape, y).value(), sx = rfft2(tape, Var<double>::constant(x)).value();
    double outside = 0.0, norm_in = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t r = 0; r < h; ++r) {
        const int ky = grid.ky[r];
        for (std::size_t k = 0; k <= w / 2; ++k) {
          if (std::max<int>(static_cast<int>(k), std::abs(ky)) > static_cast<int>(k_max)) {
            outside = std::max(outside, std::abs(spec_at(sy, ch, r, k)));
          }
        }
      }
    }
    for (std::size_t i = 0; i < sx.size(); ++i) norm_in += sx[i] * sx[i];
    c.expect(outside <= 1e-5 * std::sqrt(norm_in), "truncation-zero");

    Tensor<double> rho({201});
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = static_cast<double>(i) / 200.0;
    auto g = gate_eval(tape, gate, Var<double>::constant(rho)).value();
    bool in_range = true;
    for (double v : g.values()) in_range = in_range && v > 0.0 && v < 1.0;
    c.expect(in_range, "gate range");
  }

  {
    bool ok = true;
    for (auto kind : {InterpKind::bicubic, InterpKind::bilinear}) {
      for (auto [src, dst] : {std::pair<std::size_t, std::size_t>{4, 64}, {16, 32}, {32, 64}}) {
        auto m = interp_matrix<double>(src, dst, kind);
        for (std::size_t r = 0; r < dst; ++r) {
          double s = 0.0;
          for (std::size_t col = 0; col < src; ++col) s += m.matrix[r * src + col];
          ok = ok && std::abs(s - 1.0) < 1e-12;
        }
      }
    }
    c.expect(ok, "partition of unity");
  }

  {
    auto p = Var<double>::parameter(Tensor<double>({3}, std::vector<double>{3.0, 0.0, -4.0}));
    p.grad_buffer() = p.value();
    std::vector<Var<double>> params{p};
    const double factor = clip_grad_norm(params, 1.0);
    c.expect(std::abs(factor - 0.2) < 1e-12 && global_grad_norm(params) <= 1.0 + 1e-12, "clip-norm bound");

    TrainConfig cfg;
    auto q = Var<double>::parameter(Tensor<double>({2}, std::vector<double>{1.0, -2.0}));
    q.grad_buffer()[0] = 3.0;
    q.grad_buffer()[1] = -0.02;
    std::vector<Var<double>> qs{q};
    auto state = make_adam_state(qs);
    adam_step(qs, state, 5e-4, cfg);
    const double m0 = (1 - cfg.beta1) * 3.0, v0 = (1 - cfg.beta2) * 9.0;
    const double expect0 = 1.0 - 5e-4 * (m0 / (1 - cfg.beta1)) / (std::sqrt(v0 / (1 - cfg.beta2)) + cfg.adam_eps);
    c.expect(std::abs(q.value()[0] - expect0) < 1e-12 && std::abs(q.value()[0] - (1.0 - 5e-4)) < 1e-9, "Adam first step");
    c.expect(std::abs(q.value()[1] - (-2.0 + 5e-4)) < 1e-8, "Adam first step sign");
  }

  {
    auto cfg = SimrConfig::desk(64);
    SIMRNOModel<double> m(cfg, 11);
    m.zero_residual_outputs();
    auto x = random_tensor({1, 64, 64}, 12);
    Tape<double> inf(Tape<double>::Mode::inference);
    auto y = m.forward(inf, Var<double>::constant(x)).value();
    auto v = resize(inf, Var<double>::constant(x), 16, 16, InterpKind::bilinear);
    v = resize(inf, v, 32, 32, InterpKind::bicubic);
    v = resize(inf, v, 64, 64, InterpKind::bicubic);
    c.expect(max_abs_diff(y, v.value()) < 1e-12, "initialization reduction");
  }

  detail = c.summary();
  return c.ok();
}

struct GradCase {
  std::string name;
  std::function<Var<double>(Tape<double>&)> fn;
  NamedParams<double> params;
};

bool gradient_suite(std::string& detail) {
  std::vector<GradCase> cases;
  const std::size_t n = 32;
  auto x = Var<double>::parameter(random_tensor({3, n, n}, 21));
  UniformStream rng(22);

  {
    auto w = Var<double>::parameter(random_tensor({4, 3}, 23));
    auto b = Var<double>::parameter(random_tensor({4}, 24));
    cases.push_back({"pointwise linear", [=](Tape<double>& t) { return probe_loss(t, pointwise_linear(t, x, w, b)); },
                     {{"x", x}, {"w", w}, {"b", b}}});
  }
  {
    auto k = Var<double>::parameter(random_tensor({2, 3, 3, 3}, 25));
    auto b = Var<double>::parameter(random_tensor({2}, 26));
    cases.push_back({"periodic conv", [=](Tape<double>& t) { return probe_loss(t, conv2d_periodic(t, x, k, b)); },
                     {{"x", x}, {"k", k}, {"b", b}}});
  }
  cases.push_back({"gelu", [=](Tape<double>& t) { return probe_loss(t, gelu(t, x)); }, {{"x", x}}});
  for (auto kind : {InterpKind::bicubic, InterpKind::bilinear}) {
    cases.push_back({kind == InterpKind::bicubic ? "bicubic resize" : "bilinear resize",
                     [=](Tape<double>& t) { return probe_loss(t, resize(t, x, 64, 64, kind)); },
                     {{"x", x}}});
  }
  cases.push_back({"fft pair", [=](Tape<double>& t) { return probe_loss(t, irfft2(t, scale(t, rfft2(t, x), 0.7), n)); },
                   {{"x", x}}});
  {
    auto gate = make_gate<double>(rng);
    auto rho = Var<double>::parameter(random_tensor({40}, 27, 0.0, 1.0));
    cases.push_back({"gate MLP", [=](Tape<double>& t) { return probe_loss(t, gate_eval(t, gate, rho)); },
                     {{"rho", rho}, {"a1", gate.a1}, {"b1", gate.b1}, {"a2", gate.a2}, {"b2", gate.b2}}});
    auto weights = make_spectral_weights<double>(3, 2, 8, rng);
    auto grid = build_wavenumber_grid(n, n);
    cases.push_back({"gated spectral conv",
                     [=](Tape<double>& t) { return probe_loss(t, gated_spectral_conv(t, x, weights, &gate, grid)); },
                     {{"x", x}, {"w", weights.w}, {"a1", gate.a1}, {"b1", gate.b1}, {"a2", gate.a2}, {"b2", gate.b2}}});
    const GateMLP<double>* none = nullptr;
    cases.push_back({"spectral conv",
                     [=](Tape<double>& t) { return probe_loss(t, gated_spectral_conv(t, x, weights, none, grid)); },
                     {{"x", x}, {"w", weights.w}}});
  }
  auto pseudo = Var<double>::constant(random_tensor({1, n, n}, 28));
  auto fno = std::make_shared<FNOBaseline<double>>(FnoConfig::desk(n), 29);
  cases.push_back({"FNO baseline", [=](Tape<double>& t) { return probe_loss(t, fno->forward(t, pseudo)); },
                   fno->parameters()});
  auto simr = std::make_shared<SIMRNOModel<double>>(SimrConfig::desk(n), 30);
  auto simr_params = simr->parameters();
  for (auto& [name, v] : simr_params) {
    if (name.size() < 9 || name.compare(name.size() - 9, 9, ".spectral") != 0) continue;
    const auto d_out = static_cast<double>(v.shape()[0]);
    for (auto& w : v.mutable_value().values()) w *= d_out;
  }
  cases.push_back({"SIMR-NO 32x32", [=](Tape<double>& t) { return probe_loss(t, simr->forward(t, pseudo)); },
                   simr_params});

  GradCheckOptions opts;
  opts.max_entries = 4;
  bool ok = true;
  std::ostringstream s;
  for (const auto& gc : cases) {
    opts.step = gc.name == "SIMR-NO 32x32" ? 1e-2 : 1e-3;
    auto report = grad_check(gc.fn, gc.params, opts);
    ok = ok && report.max_rel_error <= 1e-4;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s %.2e", s.tellp() > 0 ? ", " : "", gc.name.c_str(), report.max_rel_error);
    s << buf;
  }
  detail = "max rel error: " + s.str();
  return ok;
}

bool dns_suite(std::string& detail, const ExperimentConfig& desk) {
  Checks c;
  std::ostringstream s;
  {
    SolverConfig cfg;
    cfg.n = 64;
    cfg.nu = 1e-3;
    cfg.amplitude = 0.0;
    cfg.dt = 0.01;
    auto forcing = make_forcing(cfg);
    auto state = random_initial_state(cfg.n, 31);
    double z = enstrophy(state.omega_hat);
    bool monotone = true;
    for (int step = 0; step < 200; ++step) {
      state = step_rk4(state, cfg, forcing);
      const double next = enstrophy(state.omega_hat);
      monotone = monotone && next <= z;
      z = next;
    }
    c.expect(monotone, "(a) enstrophy monotone");
  }
  {
    SolverConfig cfg;
    cfg.n = 64;
    cfg.nu = 0.01;
    cfg.amplitude = 0.0;
    cfg.dt = 0.01;
    auto forcing = make_forcing(cfg);
    FlowState state{to_spectral(sample_field(cfg.n, [](double x, double) { return std::cos(x); })), 0.0};
    const double decay = std::exp(-cfg.nu * cfg.dt);
    double worst = 0.0;
    for (int step = 0; step < 200; ++step) {
      auto next = step_rk4(state, cfg, forcing);
      worst = std::max(worst, rel(std::abs(next.omega_hat.at(0, 1)) / std::abs(state.omega_hat.at(0, 1)), decay));
      state = next;
    }
    c.expect(worst < 1e-6, "(b) single-mode decay");
    char buf[64];
    std::snprintf(buf, sizeof buf, "decay err %.1e", worst);
    s << buf;
  }
  {
    SolverConfig cfg = desk.solver;
    cfg.seed = desk.solver_seed();
    cfg.n_snapshots = 1;
    auto result = generate_dataset(cfg);
    const auto spin_steps = static_cast<std::size_t>(std::llround(cfg.spinup_time / cfg.dt));
    const std::size_t end = std::min(spin_steps + 1, result.energy.size());
    std::vector<double> tail(result.energy.begin() + static_cast<long>(end / 2),
                             result.energy.begin() + static_cast<long>(end));
    auto report = check_stationarity(tail, cfg.stationarity_window);
    c.expect(report.stationary, "(c) forced run stationary within spin-up");
    char buf[96];
    std::snprintf(buf, sizeof buf, ", drift %.3f over %zu windows", report.drift, report.window_means.size());
    s << buf;
  }
  detail = s.str() + "; " + c.summary();
  return c.ok();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json run_pipeline(const ExperimentConfig& base, std::uint64_t seed, const fs::path& dir) {
  RunOptions opts;
  opts.seed = seed;
  opts.out = dir.string();
  const auto cfg = resolve(base, opts);
  for (const auto& sub : subcommands()) {
    const auto t0 = std::chrono::steady_clock::now();
    if (run(sub, cfg, opts) != 0) throw std::runtime_error(sub + " failed for seed " + std::to_string(seed));
    std::fprintf(stderr, "seed %llu %s: %.0f s\n", static_cast<unsigned long long>(seed), sub.c_str(), seconds_since(t0));
  }
  std::ifstream in(dir / "report" / "compare.json");
  return nlohmann::json::parse(in);
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIMR-NO acceptance suite"};
  std::string config_path, work = "acceptance_runs", only;
  app.add_option("--config", config_path, "desk experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "directory for the desk runs");
  app.add_option("--only", only, "comma-separated criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  for (std::stringstream ss(only); ss.good();) {
    std::string item;
    std::getline(ss, item, ',');
    if (!item.empty()) selected.insert(std::stoi(item));
  }
  const auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  const ExperimentConfig desk = parse_config(config_path);
  bool all_ok = true;
  const auto report = [&](int id, bool ok, const std::string& detail) {
    print_line(id, ok ? "PASS" : "FAIL", detail);
    all_ok = all_ok && ok;
  };

  if (wanted(1)) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = property_suite(detail);
    const double t = seconds_since(t0);
    report(1, ok && t < 300.0, detail + ", " + std::to_string(static_cast<int>(t)) + " s");
  }
  if (wanted(2)) {
    std::string detail;
    bool ok = gradient_suite(detail);
    report(2, ok, detail);
  }
  if (wanted(3)) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = dns_suite(detail, desk);
    const double t = seconds_since(t0);
    report(3, ok && t < 600.0, detail + ", " + std::to_string(static_cast<int>(t)) + " s");
  }

  if (wanted(4) || wanted(5) || wanted(7)) {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, std::vector<double>> rel, spec;
    for (std::uint64_t seed : {0, 1, 2}) {
      auto summary = run_pipeline(desk, seed, fs::path(work) / ("seed" + std::to_string(seed)));
      for (const auto& [model, m] : summary.at("models").items()) {
        rel[model].push_back(m.at("rel_l2_mean").get<double>());
        spec[model].push_back(m.at("log_spectrum_error_mean").get<double>());
      }
    }
    const double hours = seconds_since(t0) / 3600.0;
    const double s = median3(rel["simrno"]), f = median3(rel["fno"]), b = median3(rel["bicubic"]);
    char buf[256];
    std::snprintf(buf, sizeof buf, "median RelL2 simrno %.4f fno %.4f bicubic %.4f (ratio %.3f), %.2f h", s, f, b,
                  s / b, hours);
    if (wanted(4)) report(4, s < f && f < b && s <= 0.6 * b && hours <= 4.0, buf);
    const double ss = median3(spec["simrno"]), sf = median3(spec["fno"]), sb = median3(spec["bicubic"]);
    std::snprintf(buf, sizeof buf, "log-spectrum error simrno %.3f fno %.3f bicubic %.3f (ratio %.3f)", ss, sf, sb,
                  ss / sb);
    if (wanted(5)) report(5, ss <= 0.5 * sb && ss <= sf, buf);
  }
  if (wanted(6)) print_line(6, "SKIP", "full-scale 128x128 track not run on this hardware");
  if (wanted(7)) {
    const fs::path first = fs::path(work) / "seed0", second = fs::path(work) / "seed0_repeat";
    run_pipeline(desk, 0, second);
    bool same = true;
    std::size_t files = 0;
    for (const auto& model : desk.models) {
      const auto rel_path = fs::path("metrics") / (model + ".csv");
      same = same && fs::exists(first / rel_path) && read_file(first / rel_path) == read_file(second / rel_path);
      ++files;
    }
    report(7, same, std::to_string(files) + " metrics CSVs compared between two seed-0 runs");
  }
  return all_ok ? 0 : 1;
}
