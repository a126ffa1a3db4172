#pragma once

// Experiment configuration and the gen-data / prepare / train / eval /
// spectra / compare / report pipeline.
//
// Output layout under the run directory:
//   data/dataset.sno, data/energy.csv, data/coarse.sno, data/pseudo_hr.sno, data/split.json
//   models/<model>/checkpoint.snc, train_log.csv, train_report.json
//   metrics/<model>.csv, metrics/<model>.json
//   spectra/<model>_spectra.csv, spectra/<model>_pod.csv, spectra/<model>.json
//   report/table1.md, report/boxplot_stats.csv, report/compare.json,
//   report/spectra.svg, report/rel_l2_boxplot.svg, report/summary.md
//   run_manifest.json

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "simr/data.hpp"
#include "simr/diagnostics.hpp"
#include "simr/dns.hpp"
#include "simr/model.hpp"
#include "simr/train.hpp"

namespace simr {

struct PipelineConfig {
  std::size_t r_c = 8;
  SplitSpec split;

  bool operator==(const PipelineConfig& o) const {
    return r_c == o.r_c && split.n_train == o.split.n_train && split.n_test == o.split.n_test &&
           split.ordering == o.split.ordering;
  }
};

struct DiagnosticsConfig {
  // Spectral error is summed over shells k_c < k <= n/2; 0 selects r_c / 2.
  int k_c = 0;
  // Test samples used for spectra and POD; 0 means all.
  std::size_t spectra_samples = 0;
  SsimOptions ssim;

  bool operator==(const DiagnosticsConfig& o) const {
    return k_c == o.k_c && spectra_samples == o.spectra_samples && ssim.window == o.ssim.window &&
           ssim.sigma == o.ssim.sigma && ssim.k1 == o.ssim.k1 && ssim.k2 == o.ssim.k2;
  }
};

struct SeedConfig {
  std::optional<std::uint64_t> solver, split, train;
  bool operator==(const SeedConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/paper";
  SolverConfig solver;
  PipelineConfig pipeline;
  SimrConfig simrno;
  FnoConfig fno;
  TrainConfig train;
  std::vector<std::string> models{"bicubic", "fno", "simrno"};
  DiagnosticsConfig diagnostics;
  SeedConfig seeds;

  std::uint64_t solver_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t init_seed(const std::string& model) const;
  int spectral_cutoff() const;

  void validate() const;
  nlohmann::json to_json() const;
  std::string hash() const;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::filesystem::path& path);

const std::vector<std::string>& subcommands();

struct RunOptions {
  std::optional<std::string> model;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

/// Applies --out, --seed and the SIMR_OUTPUT_ROOT environment override.
ExperimentConfig resolve(ExperimentConfig cfg, const RunOptions& opts);

/// Run one subcommand; returns the process exit status. Throws
/// DependencyError when an upstream artifact is missing.
int run(const std::string& subcommand, const ExperimentConfig& cfg, const RunOptions& opts = {});

/// The model spec ({"kind","config"}) a config assigns to a model name.
nlohmann::json model_spec(const ExperimentConfig& cfg, const std::string& model);

/// Pairs of the prepared dataset, with the split applied.
struct PreparedData {
  std::vector<SamplePair> train, test;
  std::string dataset_hash, split_hash;
};
PreparedData load_prepared(const ExperimentConfig& cfg);

std::filesystem::path run_dir(const ExperimentConfig& cfg);

/// Parse a CSV produced by this tool, checking the header against columns.
std::vector<std::vector<std::string>> read_csv(const std::string& text, const std::vector<std::string>& columns);

}  // namespace simr
