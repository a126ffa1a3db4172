#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "simr/harness.hpp"

using namespace simr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_config(const fs::path& out) {
  return {
      {"seed", 3},
      {"output_dir", out.string()},
      {"solver",
       {{"n", 16},
        {"nu", 0.02},
        {"dt", 0.05},
        {"spinup_time", 2.0},
        {"sample_interval", 0.5},
        {"n_snapshots", 12},
        {"stationarity_window", 10}}},
      {"pipeline", {{"r_c", 4}, {"n_train", 8}, {"n_test", 4}}},
      {"models",
       {{"simrno",
         {{"resolution", 16},
          {"stage1", {{"in_res", 4}, {"out_res", 8}, {"d", 4}, {"n_fno", 1}, {"n_local", 1}, {"k_max", 2}}},
          {"stage2", {{"in_res", 8}, {"out_res", 16}, {"d", 4}, {"n_fno", 1}, {"n_local", 1}, {"k_max", 4}}},
          {"head_width", 4},
          {"proj_width", 8},
          {"n_freq", 1}}},
        {"fno", {{"resolution", 16}, {"width", 4}, {"n_layers", 1}, {"k_max", 4}, {"proj_width", 8}, {"n_freq", 1}}}}},
      {"train", {{"epochs", 2}, {"batch", 4}}},
      {"diagnostics", {{"spectra_samples", 3}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("simr_harness_" + name);
  fs::remove_all(p);
  return p;
}

void run_all(const ExperimentConfig& cfg) {
  for (const auto& s : subcommands()) run(s, cfg);
}

}  // namespace

TEST_CASE("empty config gives the full-scale defaults") {
  auto c = config_from_json(json::object());
  CHECK(c.solver.n == 128);
  CHECK(c.pipeline.r_c == 8);
  CHECK(c.pipeline.split.n_train == 800);
  CHECK(c.pipeline.split.n_test == 201);
  CHECK(c.train == TrainConfig{});
  CHECK(c.simrno == SimrConfig{});
  CHECK(c.models == std::vector<std::string>{"bicubic", "fno", "simrno"});
  CHECK(c.spectral_cutoff() == 4);
}

TEST_CASE("config errors name the offending key") {
  const auto message = [](const json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({{"train", {{"lr", -1}}}}).find("train.lr") != std::string::npos);
  CHECK(message({{"solver", {{"viscosity", 1}}}}).find("solver.viscosity") != std::string::npos);
  CHECK(message({{"models", {{"fno", {{"modes", 4}}}}}}).find("fno.modes") != std::string::npos);
  CHECK(message({{"pipeline", {{"n_train", 10}}}}).find("pipeline") != std::string::npos);
  CHECK(message({{"compare", {{"models", {"lapsrn"}}}}}).find("lapsrn") != std::string::npos);
  CHECK(message({{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK(message({{"seed", "x"}}).find("seed") != std::string::npos);
}

TEST_CASE("config roundtrip and hash") {
  auto c = config_from_json(tiny_config("/tmp/a"));
  auto back = config_from_json(c.to_json());
  CHECK(back == c);
  CHECK(back.hash() == c.hash());
  auto moved = config_from_json(tiny_config("/tmp/b"));
  CHECK(moved.hash() == c.hash());
  auto other = tiny_config("/tmp/a");
  other["seed"] = 4;
  CHECK(config_from_json(other).hash() != c.hash());
}

TEST_CASE("seed streams") {
  auto c = config_from_json(tiny_config("/tmp/a"));
  CHECK(c.solver_seed() != c.split_seed());
  CHECK(c.train_seed() != c.solver_seed());
  CHECK(c.init_seed("fno") != c.init_seed("simrno"));
  auto j = tiny_config("/tmp/a");
  j["seeds"] = {{"solver", 77}};
  auto pinned = config_from_json(j);
  CHECK(pinned.solver_seed() == 77);
  j["seed"] = 9;
  auto reseeded = config_from_json(j);
  CHECK(reseeded.solver_seed() == 77);
  CHECK(reseeded.train_seed() != pinned.train_seed());
}

TEST_CASE("output override") {
  auto c = config_from_json(tiny_config("runs/x"));
  RunOptions o;
  o.out = "elsewhere";
  o.seed = 11;
  auto r = resolve(c, o);
  CHECK(r.seed == 11);
  CHECK(fs::path(r.output_dir).filename() == "elsewhere");
}

TEST_CASE("subcommands refuse to run before their inputs exist") {
  auto dir = scratch("deps");
  auto c = config_from_json(tiny_config(dir));
  const auto upstream = [&](const std::string& sub, const RunOptions& o = {}) {
    try {
      run(sub, c, o);
    } catch (const DependencyError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(upstream("prepare").find("gen-data") != std::string::npos);
  CHECK(upstream("train").find("prepare") != std::string::npos);
  run("gen-data", c);
  run("prepare", c);
  RunOptions fno;
  fno.model = "fno";
  CHECK(upstream("eval", fno).find("train --model fno") != std::string::npos);
  CHECK(upstream("compare").find("eval") != std::string::npos);
  CHECK_THROWS_AS(run("fit", c), UsageError);
  fs::remove_all(dir);
}

TEST_CASE("tiny pipeline end to end") {
  auto dir = scratch("e2e");
  auto c = config_from_json(tiny_config(dir));
  run_all(c);
  for (const char* f : {"data/dataset.sno", "data/energy.csv", "data/split.json", "models/simrno/checkpoint.snc",
                        "models/fno/train_log.csv", "metrics/bicubic.csv", "metrics/fno.json",
                        "spectra/simrno_spectra.csv", "spectra/fno_pod.csv", "report/table1.md",
                        "report/boxplot_stats.csv", "report/rel_l2_boxplot.svg", "report/spectra.svg",
                        "report/summary.md", "run_manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  auto rows = read_csv(slurp(dir / "metrics/fno.csv"), {"model", "sample_index", "mse", "rel_l2", "psnr_db", "ssim"});
  CHECK(rows.size() == 4);
  CHECK(rows.front()[1] == "8");
  CHECK(slurp(dir / "report/table1.md").find("**") != std::string::npos);
  CHECK_THROWS_AS(read_csv(slurp(dir / "metrics/fno.csv"), {"model", "mse"}), FormatError);

  auto manifest = json::parse(slurp(dir / "run_manifest.json"));
  CHECK(manifest.at("config_hash") == c.hash());
  CHECK(manifest.at("artifacts").contains("metrics/simrno.csv"));

  SUBCASE("rerunning a step rewrites identical bytes") {
    const auto before = slurp(dir / "metrics/simrno.csv");
    run("eval", c);
    CHECK(slurp(dir / "metrics/simrno.csv") == before);
  }
  SUBCASE("a second run directory reproduces the metrics") {
    auto dir2 = scratch("e2e_again");
    run_all(config_from_json(tiny_config(dir2)));
    for (const char* m : {"bicubic", "fno", "simrno"}) {
      const std::string f = std::string("metrics/") + m + ".csv";
      CHECK(slurp(dir / f) == slurp(dir2 / f));
    }
    fs::remove_all(dir2);
  }
  SUBCASE("metrics from another dataset fail the fairness check") {
    auto meta = json::parse(slurp(dir / "metrics/fno.json"));
    meta["dataset_hash"] = "0000000000000000";
    std::ofstream(dir / "metrics/fno.json") << meta.dump(2);
    CHECK_THROWS_AS(run("compare", c), ConfigError);
  }
  SUBCASE("a checkpoint from another configuration is rejected") {
    auto j = tiny_config(dir);
    j["models"]["fno"]["width"] = 6;
    RunOptions fno;
    fno.model = "fno";
    CHECK_THROWS_AS(run("eval", config_from_json(j), fno), CheckpointIncompatible);
  }
  fs::remove_all(dir);
}
