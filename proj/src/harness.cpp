#include "simr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "simr/svg.hpp"

namespace simr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kMetricsColumns{"model", "sample_index", "mse", "rel_l2", "psnr_db", "ssim"};
const std::vector<std::string> kSpectraColumns{"model", "k", "E", "Z"};
const std::vector<std::string> kPodColumns{"model", "mode", "cumulative_energy"};
const std::vector<std::string> kTrainColumns{"epoch", "train_mse", "val_mse", "lr"};
const std::vector<std::string> kEnergyColumns{"step", "time", "energy"};
const std::vector<std::string> kBoxColumns{"model", "count", "mean",  "std",         "median",  "q1",
                                           "q3",    "min",   "max",   "upper_fence", "outliers"};
const std::vector<std::string> kKnownModels{"bicubic", "fno", "simrno"};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---- JSON field readers that report the key path ----

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError(key(it.key()) + ": unknown key");
      }
    }
  }
  bool has(const char* k) const { return j_.contains(k); }
  const json& at(const char* k) const { return j_.at(k); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  double real(const char* k, double fallback) const {
    if (!has(k)) return fallback;
    if (!at(k).is_number()) throw ConfigError(key(k) + ": expected a number");
    return at(k).get<double>();
  }
  std::uint64_t count(const char* k, std::uint64_t fallback) const {
    if (!has(k)) return fallback;
    const auto& v = at(k);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ConfigError(key(k) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool flag(const char* k, bool fallback) const {
    if (!has(k)) return fallback;
    if (!at(k).is_boolean()) throw ConfigError(key(k) + ": expected true or false");
    return at(k).get<bool>();
  }
  std::string text(const char* k, const std::string& fallback) const {
    if (!has(k)) return fallback;
    if (!at(k).is_string()) throw ConfigError(key(k) + ": expected a string");
    return at(k).get<std::string>();
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  const json& j_;
  std::string path_;
};

void rethrow_with_path(const std::string& path, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

SolverConfig solver_from_json(const json& j) {
  Fields f(j, "solver");
  f.allow({"n", "nu", "amplitude", "k_f", "dt", "dealias", "spinup_time", "sample_interval", "n_snapshots",
           "stationarity_window"});
  SolverConfig d, c;
  c.n = f.count("n", d.n);
  c.nu = f.real("nu", d.nu);
  c.amplitude = f.real("amplitude", d.amplitude);
  c.k_f = static_cast<int>(f.count("k_f", static_cast<std::uint64_t>(d.k_f)));
  c.dt = f.real("dt", d.dt);
  c.dealias = f.flag("dealias", d.dealias);
  c.spinup_time = f.real("spinup_time", d.spinup_time);
  c.sample_interval = f.real("sample_interval", d.sample_interval);
  c.n_snapshots = f.count("n_snapshots", d.n_snapshots);
  c.stationarity_window = f.count("stationarity_window", d.stationarity_window);
  return c;
}

json solver_to_json(const SolverConfig& s) {
  json j = s.to_json();
  j.erase("seed");
  return j;
}

std::string ordering_name(SplitOrdering o) { return o == SplitOrdering::sequential ? "sequential" : "shuffled"; }

// ---- files ----

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write to " + p.string() + " failed");
}

void write_csv(const fs::path& p, const std::string& text, const std::vector<std::string>& columns) {
  read_csv(text, columns);
  write_text(p, text);
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) { return json::parse(read_text(p)); }

void require_file(const fs::path& p, const std::string& who, const std::string& upstream) {
  if (!fs::exists(p)) {
    throw DependencyError(who + " needs " + p.string() + "; run '" + upstream + "' first");
  }
}

// ---- manifest ----

class Manifest {
 public:
  explicit Manifest(const ExperimentConfig& cfg) : dir_(run_dir(cfg)), path_(dir_ / "run_manifest.json") {
    if (fs::exists(path_)) j_ = read_json(path_);
    if (!j_.is_object()) j_ = json::object();
    j_["config_hash"] = cfg.hash();
    j_["config"] = cfg.to_json();
    if (!j_.contains("artifacts")) j_["artifacts"] = json::object();
  }

  void add(const fs::path& p) {
    const std::string rel = fs::relative(p, dir_).generic_string();
    j_["artifacts"][rel] = file_digest(p);
  }
  void timing(const std::string& step, double seconds) {
    j_["wall_seconds"][step] = seconds;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j_["timestamps"][step] = buf;
  }
  json& raw() { return j_; }
  void save() const { write_json(path_, j_); }

  /// Every listed artifact must exist with its recorded hash.
  void verify() const {
    for (auto it = j_["artifacts"].begin(); it != j_["artifacts"].end(); ++it) {
      const fs::path p = dir_ / it.key();
      if (!fs::exists(p)) throw DependencyError("manifest lists missing artifact " + it.key());
      if (file_digest(p) != it.value().get<std::string>()) {
        throw DependencyError("artifact " + it.key() + " changed since it was recorded; rerun its subcommand");
      }
    }
  }

 private:
  fs::path dir_, path_;
  json j_ = json::object();
};

// ---- helpers shared by subcommands ----

fs::path checkpoint_path(const ExperimentConfig& cfg, const std::string& m) {
  return run_dir(cfg) / "models" / m / "checkpoint.snc";
}

std::vector<std::string> selected_models(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (opts.model) {
    if (std::find(kKnownModels.begin(), kKnownModels.end(), *opts.model) == kKnownModels.end()) {
      throw UsageError("unknown model '" + *opts.model + "' (expected simrno, fno or bicubic)");
    }
    return {*opts.model};
  }
  return cfg.models;
}

std::unique_ptr<Reconstructor<float>> load_model(const ExperimentConfig& cfg, const std::string& m,
                                                  const std::string& who) {
  const fs::path p = checkpoint_path(cfg, m);
  require_file(p, who, "train --model " + m);
  auto model = load_checkpoint<float>(p);
  if (model->kind() != m) throw CheckpointIncompatible(p.string() + " holds a " + model->kind() + " model");
  if (model_spec(cfg, m) != json{{"kind", m}, {"config", model->config_json()}}) {
    throw CheckpointIncompatible(p.string() + " was trained with a different model configuration; rerun train");
  }
  return model;
}

std::vector<SamplePair> spectra_subset(const ExperimentConfig& cfg, const std::vector<SamplePair>& test) {
  const std::size_t n = cfg.diagnostics.spectra_samples == 0 ? test.size()
                                                              : std::min(cfg.diagnostics.spectra_samples, test.size());
  return std::vector<SamplePair>(test.begin(), test.begin() + static_cast<long>(n));
}

void log(const RunOptions& opts, const std::string& msg) {
  if (opts.verbose) std::cerr << msg << std::endl;
}

// ---- subcommands ----

void gen_data(const ExperimentConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  SolverConfig s = cfg.solver;
  s.seed = cfg.solver_seed();
  log(opts, "gen-data: integrating " + std::to_string(s.n) + "^2 flow, " + std::to_string(s.n_snapshots) + " snapshots");
  DnsResult res = generate_dataset(s);
  res.dataset.metadata["config_hash"] = cfg.hash();
  const fs::path dir = run_dir(cfg) / "data";
  save_dataset(res.dataset, dir / "dataset.sno");
  std::ostringstream csv;
  csv << "step,time,energy\n";
  for (std::size_t i = 0; i < res.energy.size(); ++i) {
    csv << i << ',' << format_number(res.time[i]) << ',' << format_number(res.energy[i]) << '\n';
  }
  write_csv(dir / "energy.csv", csv.str(), kEnergyColumns);
  manifest.add(dir / "dataset.sno");
  manifest.add(dir / "energy.csv");
  manifest.raw()["dataset"] = {{"path", "data/dataset.sno"},
                               {"hash", file_digest(dir / "dataset.sno")},
                               {"stationary", res.stationarity.stationary},
                               {"drift", res.stationarity.drift},
                               {"cfl_max", res.cfl_max}};
  if (!res.stationarity.stationary) {
    std::cerr << "warning: energy drift " << res.stationarity.drift << " exceeds the stationarity band" << std::endl;
  }
}

void prepare(const ExperimentConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  const fs::path dir = run_dir(cfg) / "data";
  require_file(dir / "dataset.sno", "prepare", "gen-data");
  const SnapshotDataset ds = load_dataset(dir / "dataset.sno");
  if (ds.h != cfg.solver.n) {
    throw ConfigError("dataset grid " + std::to_string(ds.h) + " does not match solver.n = " + std::to_string(cfg.solver.n));
  }
  log(opts, "prepare: restricting to " + std::to_string(cfg.pipeline.r_c) + "^2 observations");
  const auto pairs = build_pairs(ds, cfg.pipeline.r_c);
  SnapshotDataset coarse, pseudo;
  coarse.n = pseudo.n = ds.n;
  coarse.h = coarse.w = cfg.pipeline.r_c;
  pseudo.h = pseudo.w = ds.h;
  for (const auto& p : pairs) {
    coarse.fields.insert(coarse.fields.end(), p.coarse.values().begin(), p.coarse.values().end());
    pseudo.fields.insert(pseudo.fields.end(), p.pseudo_hr.values().begin(), p.pseudo_hr.values().end());
  }
  const std::string ds_hash = file_digest(dir / "dataset.sno");
  coarse.metadata = {{"source", ds_hash}, {"r_c", cfg.pipeline.r_c}, {"kind", "coarse observation"}};
  pseudo.metadata = {{"source", ds_hash}, {"r_c", cfg.pipeline.r_c}, {"kind", "bicubic pseudo high-resolution"}};
  save_dataset(coarse, dir / "coarse.sno");
  save_dataset(pseudo, dir / "pseudo_hr.sno");

  SplitSpec spec = cfg.pipeline.split;
  spec.seed = cfg.split_seed();
  const Split sp = split(ds.n, spec);
  const json manifest_split = {{"dataset_hash", ds_hash},
                               {"coarse_hash", file_digest(dir / "coarse.sno")},
                               {"pseudo_hr_hash", file_digest(dir / "pseudo_hr.sno")},
                               {"r_c", cfg.pipeline.r_c},
                               {"ordering", ordering_name(spec.ordering)},
                               {"seed", spec.seed},
                               {"train", sp.train},
                               {"test", sp.test}};
  write_json(dir / "split.json", manifest_split);
  for (const char* f : {"coarse.sno", "pseudo_hr.sno", "split.json"}) manifest.add(dir / f);
}

void train_models(const ExperimentConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  const PreparedData data = load_prepared(cfg);
  for (const auto& m : selected_models(cfg, opts)) {
    const auto start = std::chrono::steady_clock::now();
    auto model = make_model<float>(model_spec(cfg, m), cfg.init_seed(m));
    const fs::path dir = run_dir(cfg) / "models" / m;
    json summary = {{"model", m},
                    {"config_hash", cfg.hash()},
                    {"dataset_hash", data.dataset_hash},
                    {"split_hash", data.split_hash},
                    {"parameter_count", model->parameter_count()},
                    {"init_seed", cfg.init_seed(m)}};
    if (m != "bicubic") {
      TrainConfig t = cfg.train;
      t.seed = cfg.train_seed();
      log(opts, "train: " + m + " with " + std::to_string(model->parameter_count()) + " parameters");
      const TrainReport report = train(*model, data.train, data.test, t, [&](const EpochRecord& e) {
        log(opts, "  " + m + " epoch " + std::to_string(e.epoch) + " train " + format_number(e.train_mse) + " val " +
                      format_number(e.val_mse));
      });
      json r = report.to_json();
      r.erase("wall_seconds");
      summary["train"] = r;
      summary["train_config"] = t.to_json();
      write_csv(dir / "train_log.csv", report.to_csv(), kTrainColumns);
      manifest.add(dir / "train_log.csv");
    }
    save_checkpoint(*model, dir / "checkpoint.snc");
    summary["checkpoint_hash"] = file_digest(dir / "checkpoint.snc");
    write_json(dir / "train_report.json", summary);
    manifest.add(dir / "checkpoint.snc");
    manifest.add(dir / "train_report.json");
    manifest.timing("train:" + m, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
}

void eval_models(const ExperimentConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  const auto models = selected_models(cfg, opts);
  for (const auto& m : models) require_file(checkpoint_path(cfg, m), "eval", "train --model " + m);
  const PreparedData data = load_prepared(cfg);
  for (const auto& m : models) {
    const auto model = load_model(cfg, m, "eval");
    log(opts, "eval: " + m + " on " + std::to_string(data.test.size()) + " test pairs");
    const auto records = evaluate(*model, data.test, cfg.diagnostics.ssim);
    const fs::path dir = run_dir(cfg) / "metrics";
    write_csv(dir / (m + ".csv"), metrics_csv(m, records), kMetricsColumns);
    std::vector<double> rel;
    for (const auto& r : records) rel.push_back(r.rel_l2);
    const AggregateStats st = aggregate_stats(rel);
    write_json(dir / (m + ".json"), {{"model", m},
                                     {"config_hash", cfg.hash()},
                                     {"dataset_hash", data.dataset_hash},
                                     {"split_hash", data.split_hash},
                                     {"checkpoint_hash", file_digest(checkpoint_path(cfg, m))},
                                     {"n_samples", records.size()},
                                     {"rel_l2_mean", st.mean},
                                     {"rel_l2_std", st.std},
                                     {"rel_l2_median", st.median}});
    manifest.add(dir / (m + ".csv"));
    manifest.add(dir / (m + ".json"));
  }
}

void spectra_models(const ExperimentConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  const auto models = selected_models(cfg, opts);
  for (const auto& m : models) require_file(checkpoint_path(cfg, m), "spectra", "train --model " + m);
  const PreparedData data = load_prepared(cfg);
  const auto subset = spectra_subset(cfg, data.test);
  if (subset.size() < 2) throw ConfigError("diagnostics.spectra_samples: at least 2 test samples are needed");
  const int k_c = cfg.spectral_cutoff();
  const int k_max = static_cast<int>(cfg.solver.n / 2);

  std::vector<Tensor<float>> truths;
  std::vector<SpectrumCurve> truth_e, truth_z;
  for (const auto& p : subset) {
    truths.push_back(p.truth);
    const Field2D f = to_field(p.truth);
    truth_e.push_back(energy_spectrum(f));
    truth_z.push_back(enstrophy_spectrum(f));
  }
  const auto mean_curve = [](const std::vector<SpectrumCurve>& cs) {
    SpectrumCurve out = cs.front();
    for (std::size_t i = 1; i < cs.size(); ++i) {
      for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += cs[i].values[k];
    }
    for (auto& v : out.values) v /= static_cast<double>(cs.size());
    return out;
  };
  const auto rows = [](std::ostringstream& s, const std::string& name, const SpectrumCurve& e, const SpectrumCurve& z) {
    for (std::size_t k = 0; k < e.k.size(); ++k) {
      s << name << ',' << e.k[k] << ',' << format_number(e.values[k]) << ',' << format_number(z.values[k]) << '\n';
    }
  };
  const auto pod_rows = [](std::ostringstream& s, const std::string& name, const PODResult& r) {
    for (std::size_t i = 0; i < r.cumulative.size(); ++i) {
      s << name << ',' << i + 1 << ',' << format_number(r.cumulative[i]) << '\n';
    }
  };
  const SpectrumCurve te = mean_curve(truth_e), tz = mean_curve(truth_z);
  const PODResult truth_pod = pod_cumulative(truths);

  for (const auto& m : models) {
    const auto model = load_model(cfg, m, "spectra");
    log(opts, "spectra: " + m + " on " + std::to_string(subset.size()) + " test pairs");
    std::vector<SpectrumCurve> pe, pz;
    std::vector<Tensor<float>> preds;
    std::vector<double> errors;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      Tensor<float> pred = predict(*model, subset[i]).reshaped({cfg.solver.n, cfg.solver.n});
      const Field2D f = to_field(pred);
      pe.push_back(energy_spectrum(f));
      pz.push_back(enstrophy_spectrum(f));
      errors.push_back(log_spectrum_error(pe.back(), truth_e[i], k_c, k_max));
      preds.push_back(std::move(pred));
    }
    std::ostringstream spec_csv, pod_csv;
    spec_csv << "model,k,E,Z\n";
    rows(spec_csv, m, mean_curve(pe), mean_curve(pz));
    rows(spec_csv, "truth", te, tz);
    pod_csv << "model,mode,cumulative_energy\n";
    pod_rows(pod_csv, m, pod_cumulative(preds));
    pod_rows(pod_csv, "truth", truth_pod);
    const fs::path dir = run_dir(cfg) / "spectra";
    write_csv(dir / (m + "_spectra.csv"), spec_csv.str(), kSpectraColumns);
    write_csv(dir / (m + "_pod.csv"), pod_csv.str(), kPodColumns);
    double mean_err = 0.0;
    for (double e : errors) mean_err += e;
    mean_err /= static_cast<double>(errors.size());
    write_json(dir / (m + ".json"), {{"model", m},
                                     {"config_hash", cfg.hash()},
                                     {"dataset_hash", data.dataset_hash},
                                     {"split_hash", data.split_hash},
                                     {"k_c", k_c},
                                     {"k_max", k_max},
                                     {"n_samples", subset.size()},
                                     {"log_spectrum_error_mean", mean_err},
                                     {"log_spectrum_error", errors}});
    for (const auto& f : {m + "_spectra.csv", m + "_pod.csv", m + ".json"}) manifest.add(dir / f);
  }
}

struct ModelMetrics {
  std::string model;
  std::vector<double> mse, rel, psnr, ssim;
  json meta;
};

std::vector<ModelMetrics> load_metrics(const ExperimentConfig& cfg, const std::string& who) {
  std::vector<ModelMetrics> out;
  for (const auto& m : cfg.models) {
    const fs::path dir = run_dir(cfg) / "metrics";
    require_file(dir / (m + ".csv"), who, "eval --model " + m);
    require_file(dir / (m + ".json"), who, "eval --model " + m);
    ModelMetrics mm;
    mm.model = m;
    mm.meta = read_json(dir / (m + ".json"));
    for (const auto& row : read_csv(read_text(dir / (m + ".csv")), kMetricsColumns)) {
      mm.mse.push_back(std::stod(row[2]));
      mm.rel.push_back(std::stod(row[3]));
      mm.psnr.push_back(std::stod(row[4]));
      mm.ssim.push_back(std::stod(row[5]));
    }
    out.push_back(std::move(mm));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void compare(const ExperimentConfig& cfg, const RunOptions&, Manifest& manifest) {
  const auto metrics = load_metrics(cfg, "compare");
  for (const auto& m : metrics) {
    if (m.meta.at("dataset_hash") != metrics.front().meta.at("dataset_hash") ||
        m.meta.at("split_hash") != metrics.front().meta.at("split_hash")) {
      throw ConfigError("fairness check failed: " + m.model + " was evaluated on a different dataset or split than " +
                        metrics.front().model);
    }
  }
  const fs::path dir = run_dir(cfg) / "report";
  json summary = {{"config_hash", cfg.hash()},
                  {"dataset_hash", metrics.front().meta.at("dataset_hash")},
                  {"split_hash", metrics.front().meta.at("split_hash")},
                  {"models", json::object()}};
  std::ostringstream box;
  box << "model,count,mean,std,median,q1,q3,min,max,upper_fence,outliers\n";

  struct Row {
    std::string model;
    AggregateStats rel;
    double mse, psnr, ssim;
    std::optional<double> spec;
  };
  std::vector<Row> rows;
  for (const auto& m : metrics) {
    Row r{m.model, aggregate_stats(m.rel), mean_of(m.mse), mean_of(m.psnr), mean_of(m.ssim), std::nullopt};
    const fs::path sp = run_dir(cfg) / "spectra" / (m.model + ".json");
    if (fs::exists(sp)) r.spec = read_json(sp).at("log_spectrum_error_mean").get<double>();
    const auto& s = r.rel;
    box << m.model << ',' << s.count << ',' << format_number(s.mean) << ',' << format_number(s.std) << ','
        << format_number(s.median) << ',' << format_number(s.q1) << ',' << format_number(s.q3) << ','
        << format_number(s.min) << ',' << format_number(s.max) << ',' << format_number(s.upper_fence) << ','
        << s.outliers << '\n';
    json mj = {{"rel_l2_mean", s.mean}, {"rel_l2_std", s.std},   {"rel_l2_median", s.median},
               {"rel_l2_q1", s.q1},     {"rel_l2_q3", s.q3},     {"outliers", s.outliers},
               {"mse_mean", r.mse},     {"psnr_mean", r.psnr},   {"ssim_mean", r.ssim}};
    if (r.spec) mj["log_spectrum_error_mean"] = *r.spec;
    summary["models"][m.model] = mj;
    rows.push_back(r);
  }

  const auto best = [&](auto key, bool lower) {
    std::size_t b = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (lower ? key(rows[i]) < key(rows[b]) : key(rows[i]) > key(rows[b])) b = i;
    }
    return b;
  };
  const std::size_t b_rel = best([](const Row& r) { return r.rel.mean; }, true);
  const std::size_t b_mse = best([](const Row& r) { return r.mse; }, true);
  const std::size_t b_psnr = best([](const Row& r) { return r.psnr; }, false);
  const std::size_t b_ssim = best([](const Row& r) { return r.ssim; }, false);
  const auto cell = [](const std::string& s, bool bold) { return bold ? "**" + s + "**" : s; };
  const auto fmt = [](double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  std::ostringstream md;
  md << "| Model | Relative L2 (mean +/- std) | MSE | PSNR (dB) | SSIM |\n";
  md << "|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    md << "| " << r.model << " | " << cell(fmt(r.rel.mean, 4) + " +/- " + fmt(r.rel.std, 4), i == b_rel) << " | "
       << cell(fmt(r.mse, 6), i == b_mse) << " | " << cell(fmt(r.psnr, 2), i == b_psnr) << " | "
       << cell(fmt(r.ssim, 4), i == b_ssim) << " |\n";
  }
  md << "\nBest results in **bold**. Test pairs: " << rows.front().rel.count << ".\n";

  write_text(dir / "table1.md", md.str());
  write_csv(dir / "boxplot_stats.csv", box.str(), kBoxColumns);
  write_json(dir / "compare.json", summary);
  for (const char* f : {"table1.md", "boxplot_stats.csv", "compare.json"}) manifest.add(dir / f);
}

void report(const ExperimentConfig& cfg, const RunOptions&, Manifest& manifest) {
  const auto metrics = load_metrics(cfg, "report");
  const fs::path dir = run_dir(cfg) / "report";
  require_file(dir / "compare.json", "report", "compare");
  for (const auto& m : cfg.models) {
    require_file(run_dir(cfg) / "spectra" / (m + "_spectra.csv"), "report", "spectra --model " + m);
  }

  std::vector<svg::Box> boxes;
  for (const auto& m : metrics) boxes.push_back({m.model, aggregate_stats(m.rel), m.rel});
  write_text(dir / "rel_l2_boxplot.svg", svg::box_plot("Relative L2 error on the test set", "relative L2", boxes));

  std::vector<svg::Series> e_series, z_series;
  bool have_truth = false;
  for (const auto& m : cfg.models) {
    const auto rows = read_csv(read_text(run_dir(cfg) / "spectra" / (m + "_spectra.csv")), kSpectraColumns);
    std::map<std::string, std::pair<svg::Series, svg::Series>> by;
    for (const auto& row : rows) {
      auto& [e, z] = by[row[0]];
      e.label = z.label = row[0];
      e.x.push_back(std::stod(row[1]));
      z.x.push_back(std::stod(row[1]));
      e.y.push_back(std::stod(row[2]));
      z.y.push_back(std::stod(row[3]));
    }
    if (!have_truth && by.count("truth")) {
      e_series.push_back(by["truth"].first);
      z_series.push_back(by["truth"].second);
      have_truth = true;
    }
    if (by.count(m)) {
      e_series.push_back(by[m].first);
      z_series.push_back(by[m].second);
    }
  }
  write_text(dir / "spectra.svg", svg::loglog_plot("Energy spectrum (test mean)", "k", "E(k)", e_series));
  write_text(dir / "enstrophy_spectra.svg", svg::loglog_plot("Enstrophy spectrum (test mean)", "k", "Z(k)", z_series));

  const json summary = read_json(dir / "compare.json");
  std::ostringstream md;
  md << "# Reconstruction report\n\n";
  md << "Config hash: `" << cfg.hash() << "`  \n";
  md << "Dataset hash: `" << summary.at("dataset_hash").get<std::string>() << "`  \n";
  md << "Grid " << cfg.solver.n << "x" << cfg.solver.n << ", observations " << cfg.pipeline.r_c << "x"
     << cfg.pipeline.r_c << ", " << cfg.pipeline.split.n_train << " train / " << cfg.pipeline.split.n_test
     << " test pairs, " << cfg.train.epochs << " epochs.\n\n";
  md << read_text(dir / "table1.md") << "\n";
  md << "| Model | Log-spectrum error (k > " << cfg.spectral_cutoff() << ") |\n|---|---|\n";
  for (const auto& m : cfg.models) {
    const auto& mj = summary.at("models").at(m);
    md << "| " << m << " | "
       << (mj.contains("log_spectrum_error_mean") ? format_number(mj.at("log_spectrum_error_mean").get<double>()) : "n/a")
       << " |\n";
  }
  md << "\n![relative L2](rel_l2_boxplot.svg)\n\n![energy spectra](spectra.svg)\n\n![enstrophy spectra](enstrophy_spectra.svg)\n";
  write_text(dir / "summary.md", md.str());
  for (const char* f : {"rel_l2_boxplot.svg", "spectra.svg", "enstrophy_spectra.svg", "summary.md"}) {
    manifest.add(dir / f);
  }
  manifest.verify();
}

}  // namespace

// ---- config ----

std::uint64_t ExperimentConfig::solver_seed() const { return seeds.solver.value_or(derive_seed(seed, 1)); }
std::uint64_t ExperimentConfig::split_seed() const { return seeds.split.value_or(derive_seed(seed, 2)); }
std::uint64_t ExperimentConfig::train_seed() const { return seeds.train.value_or(derive_seed(seed, 3)); }
std::uint64_t ExperimentConfig::init_seed(const std::string& model) const {
  const auto it = std::find(kKnownModels.begin(), kKnownModels.end(), model);
  return derive_seed(train_seed(), 16 + static_cast<std::uint64_t>(it - kKnownModels.begin()));
}

int ExperimentConfig::spectral_cutoff() const {
  return diagnostics.k_c > 0 ? diagnostics.k_c : static_cast<int>(pipeline.r_c / 2);
}

void ExperimentConfig::validate() const {
  rethrow_with_path("solver", [&] { solver.validate(); });
  if (pipeline.r_c == 0 || solver.n % pipeline.r_c != 0 || (pipeline.r_c & (pipeline.r_c - 1)) != 0) {
    throw ConfigError("pipeline.r_c: must be a power of two dividing solver.n");
  }
  if (pipeline.split.n_train == 0 || pipeline.split.n_test == 0) {
    throw ConfigError("pipeline.n_train and pipeline.n_test must be positive");
  }
  if (pipeline.split.n_train + pipeline.split.n_test != solver.n_snapshots) {
    throw ConfigError("pipeline: n_train + n_test must equal solver.n_snapshots");
  }
  rethrow_with_path("models.simrno", [&] { simrno.validate(); });
  rethrow_with_path("models.fno", [&] { fno.validate(); });
  if (simrno.resolution != solver.n) throw ConfigError("models.simrno.resolution: must equal solver.n");
  if (fno.resolution != solver.n) throw ConfigError("models.fno.resolution: must equal solver.n");
  train.validate();
  if (models.empty()) throw ConfigError("compare.models: must name at least one model");
  for (const auto& m : models) {
    if (std::find(kKnownModels.begin(), kKnownModels.end(), m) == kKnownModels.end()) {
      throw ConfigError("compare.models: unknown model '" + m + "'");
    }
  }
  if (diagnostics.k_c < 0 || diagnostics.k_c >= static_cast<int>(solver.n / 2)) {
    throw ConfigError("diagnostics.k_c: must lie in [0, solver.n/2)");
  }
  if (diagnostics.ssim.window == 0 || diagnostics.ssim.window % 2 == 0) {
    throw ConfigError("diagnostics.ssim.window: must be odd");
  }
  if (!(diagnostics.ssim.sigma > 0.0)) throw ConfigError("diagnostics.ssim.sigma: must be positive");
}

json ExperimentConfig::to_json() const {
  json seeds_j = json::object();
  if (seeds.solver) seeds_j["solver"] = *seeds.solver;
  if (seeds.split) seeds_j["split"] = *seeds.split;
  if (seeds.train) seeds_j["train"] = *seeds.train;
  return {{"seed", seed},
          {"output_dir", output_dir},
          {"seeds", seeds_j},
          {"solver", solver_to_json(solver)},
          {"pipeline",
           {{"r_c", pipeline.r_c},
            {"n_train", pipeline.split.n_train},
            {"n_test", pipeline.split.n_test},
            {"ordering", ordering_name(pipeline.split.ordering)}}},
          {"models", {{"simrno", simrno.to_json()}, {"fno", fno.to_json()}, {"bicubic", json::object()}}},
          {"train", train.to_json()},
          {"compare", {{"models", models}}},
          {"diagnostics",
           {{"k_c", diagnostics.k_c},
            {"spectra_samples", diagnostics.spectra_samples},
            {"ssim",
             {{"window", diagnostics.ssim.window},
              {"sigma", diagnostics.ssim.sigma},
              {"k1", diagnostics.ssim.k1},
              {"k2", diagnostics.ssim.k2}}}}}};
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  return bytes_digest(j.dump());
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return a.to_json() == b.to_json(); }

ExperimentConfig config_from_json(const json& j) {
  Fields root(j, "");
  root.allow({"seed", "output_dir", "seeds", "solver", "pipeline", "models", "train", "compare", "diagnostics"});
  ExperimentConfig c;
  c.seed = root.count("seed", c.seed);
  c.output_dir = root.text("output_dir", c.output_dir);
  if (root.has("seeds")) {
    Fields f(root.at("seeds"), "seeds");
    f.allow({"solver", "split", "train"});
    if (f.has("solver")) c.seeds.solver = f.count("solver", 0);
    if (f.has("split")) c.seeds.split = f.count("split", 0);
    if (f.has("train")) c.seeds.train = f.count("train", 0);
  }
  if (root.has("solver")) c.solver = solver_from_json(root.at("solver"));
  if (root.has("pipeline")) {
    Fields f(root.at("pipeline"), "pipeline");
    f.allow({"r_c", "n_train", "n_test", "ordering"});
    c.pipeline.r_c = f.count("r_c", c.pipeline.r_c);
    c.pipeline.split.n_train = f.count("n_train", c.pipeline.split.n_train);
    c.pipeline.split.n_test = f.count("n_test", c.pipeline.split.n_test);
    const std::string ord = f.text("ordering", "sequential");
    if (ord == "sequential") {
      c.pipeline.split.ordering = SplitOrdering::sequential;
    } else if (ord == "shuffled") {
      c.pipeline.split.ordering = SplitOrdering::seeded_shuffle;
    } else {
      throw ConfigError("pipeline.ordering: expected \"sequential\" or \"shuffled\"");
    }
  }
  if (root.has("models")) {
    Fields f(root.at("models"), "models");
    f.allow({"simrno", "fno", "bicubic"});
    if (f.has("simrno")) rethrow_with_path("models", [&] { c.simrno = simr_config_from_json(f.at("simrno")); });
    if (f.has("fno")) rethrow_with_path("models", [&] { c.fno = fno_config_from_json(f.at("fno")); });
    if (f.has("bicubic")) Fields(f.at("bicubic"), "models.bicubic").allow({});
  }
  if (root.has("train")) c.train = train_config_from_json(root.at("train"), "train");
  if (root.has("compare")) {
    Fields f(root.at("compare"), "compare");
    f.allow({"models"});
    if (f.has("models")) {
      const auto& arr = f.at("models");
      if (!arr.is_array()) throw ConfigError("compare.models: expected an array of model names");
      c.models.clear();
      for (const auto& m : arr) {
        if (!m.is_string()) throw ConfigError("compare.models: expected an array of model names");
        c.models.push_back(m.get<std::string>());
      }
    }
  }
  if (root.has("diagnostics")) {
    Fields f(root.at("diagnostics"), "diagnostics");
    f.allow({"k_c", "spectra_samples", "ssim"});
    c.diagnostics.k_c = static_cast<int>(f.count("k_c", 0));
    c.diagnostics.spectra_samples = f.count("spectra_samples", 0);
    if (f.has("ssim")) {
      Fields s(f.at("ssim"), "diagnostics.ssim");
      s.allow({"window", "sigma", "k1", "k2"});
      c.diagnostics.ssim.window = s.count("window", c.diagnostics.ssim.window);
      c.diagnostics.ssim.sigma = s.real("sigma", c.diagnostics.ssim.sigma);
      c.diagnostics.ssim.k1 = s.real("k1", c.diagnostics.ssim.k1);
      c.diagnostics.ssim.k2 = s.real("k2", c.diagnostics.ssim.k2);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"gen-data", "prepare", "train", "eval", "spectra", "compare", "report"};
  return s;
}

ExperimentConfig resolve(ExperimentConfig cfg, const RunOptions& opts) {
  if (opts.out) cfg.output_dir = *opts.out;
  if (opts.seed) cfg.seed = *opts.seed;
  const char* root = std::getenv("SIMR_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && fs::path(cfg.output_dir).is_relative()) {
    cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
  }
  return cfg;
}

fs::path run_dir(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir); }

json model_spec(const ExperimentConfig& cfg, const std::string& model) {
  if (model == "simrno") return {{"kind", model}, {"config", cfg.simrno.to_json()}};
  if (model == "fno") return {{"kind", model}, {"config", cfg.fno.to_json()}};
  if (model == "bicubic") return {{"kind", model}, {"config", {{"resolution", cfg.solver.n}}}};
  throw UsageError("unknown model '" + model + "'");
}

PreparedData load_prepared(const ExperimentConfig& cfg) {
  const fs::path dir = run_dir(cfg) / "data";
  require_file(dir / "split.json", "this step", "prepare");
  const json sp = read_json(dir / "split.json");
  PreparedData out;
  out.dataset_hash = file_digest(dir / "dataset.sno");
  out.split_hash = file_digest(dir / "split.json");
  if (sp.at("dataset_hash") != out.dataset_hash || sp.at("coarse_hash") != file_digest(dir / "coarse.sno") ||
      sp.at("pseudo_hr_hash") != file_digest(dir / "pseudo_hr.sno")) {
    throw DependencyError("prepared pairs are stale relative to data/dataset.sno; run 'prepare' again");
  }
  if (sp.at("r_c").get<std::size_t>() != cfg.pipeline.r_c) {
    throw DependencyError("prepared pairs use a different r_c; run 'prepare' again");
  }
  const SnapshotDataset ds = load_dataset(dir / "dataset.sno");
  const SnapshotDataset coarse = load_dataset(dir / "coarse.sno");
  const SnapshotDataset pseudo = load_dataset(dir / "pseudo_hr.sno");
  const auto pair = [&](std::size_t i) {
    SamplePair p;
    p.index = i;
    p.truth = ds.snapshot(i);
    p.coarse = coarse.snapshot(i);
    p.pseudo_hr = pseudo.snapshot(i);
    return p;
  };
  for (std::size_t i : sp.at("train").get<std::vector<std::size_t>>()) out.train.push_back(pair(i));
  for (std::size_t i : sp.at("test").get<std::vector<std::size_t>>()) out.test.push_back(pair(i));
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text, const std::vector<std::string>& columns) {
  std::istringstream in(text);
  std::string line;
  const auto split_line = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(l);
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line) || split_line(line) != columns) {
    throw FormatError("CSV header does not match the expected columns", 0);
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    auto cells = split_line(line);
    if (cells.size() != columns.size()) throw FormatError("CSV row has the wrong number of columns", offset);
    offset += line.size() + 1;
    rows.push_back(std::move(cells));
  }
  return rows;
}

int run(const std::string& subcommand, const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto& subs = subcommands();
  if (std::find(subs.begin(), subs.end(), subcommand) == subs.end()) {
    throw UsageError("unknown subcommand '" + subcommand + "'");
  }
  cfg.validate();
  fs::create_directories(run_dir(cfg));
  Manifest manifest(cfg);
  if (subcommand == "gen-data") gen_data(cfg, opts, manifest);
  if (subcommand == "prepare") prepare(cfg, opts, manifest);
  if (subcommand == "train") train_models(cfg, opts, manifest);
  if (subcommand == "eval") eval_models(cfg, opts, manifest);
  if (subcommand == "spectra") spectra_models(cfg, opts, manifest);
  if (subcommand == "compare") compare(cfg, opts, manifest);
  if (subcommand == "report") report(cfg, opts, manifest);
  manifest.timing(subcommand, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  manifest.save();
  return 0;
}

}  // namespace simr
