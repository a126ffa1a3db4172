#pragma once

// SIMR-NO (two residual stages plus a refinement head), the single-stage FNO
// baseline and the bicubic passthrough, behind one Reconstructor interface.
//
// Checkpoint layout (SNC1), little-endian:
//   "SNC1" | u32 version=1 | u32 tensor count
//   | per tensor: u16 name length, name, u8 rank, rank x u32 dims, float32 data
//   | u32 json_length | config JSON

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "simr/autodiff.hpp"
#include "simr/ops.hpp"
#include "simr/spectral.hpp"

namespace simr {

struct StageConfig {
  std::size_t in_res = 32;
  std::size_t out_res = 64;
  std::size_t d = 64;
  std::size_t n_fno = 3;
  std::size_t n_local = 2;
  std::size_t k_max = 16;

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const StageConfig&) const = default;
};

struct SimrConfig {
  std::size_t resolution = 128;
  StageConfig stage1{32, 64, 64, 3, 2, 16};
  StageConfig stage2{64, 128, 80, 5, 4, 32};
  std::size_t head_width = 32;
  std::size_t proj_width = 128;
  std::size_t n_freq = 6;

  /// Same block counts with widths (32, 40) and modes scaled to the grid.
  static SimrConfig desk(std::size_t resolution);

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const SimrConfig&) const = default;
};

struct FnoConfig {
  std::size_t resolution = 128;
  std::size_t width = 64;
  std::size_t n_layers = 4;
  std::size_t k_max = 16;
  std::size_t proj_width = 128;
  std::size_t n_freq = 6;

  static FnoConfig desk(std::size_t resolution);

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const FnoConfig&) const = default;
};

/// [x, y, {sin(pi i x), cos(pi i x), sin(pi i y), cos(pi i y)}_{i=1..n_freq}]
/// with x = column/res and y = row/res: [2 + 4 n_freq, res, res].
template <typename T>
Tensor<T> positional_features(std::size_t res, std::size_t n_freq = 6);

template <typename T>
struct Linear {
  Var<T> w;  // [out, in]
  Var<T> b;  // [out]
};

template <typename T>
struct Conv3 {
  Var<T> k;  // [out, in, 3, 3]
  Var<T> b;  // [out]
};

template <typename T>
struct FnoBlock {
  SpectralWeights<T> spectral;
  GateMLP<T> gate;
  bool gated = true;
  Linear<T> bypass;
};

template <typename T>
struct LocalBlock {
  Conv3<T> c1, c2, c3;
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Var<T>>>;

template <typename T>
class SIMRStage {
 public:
  SIMRStage() = default;
  SIMRStage(const StageConfig& cfg, std::size_t proj_width, std::size_t n_freq, UniformStream& rng);

  const StageConfig& config() const { return cfg_; }

  /// b + alpha * Q2 gelu(Q1 v) where b = bicubic(a) at out_res.
  Var<T> forward(Tape<T>& tape, const Var<T>& a, const Var<T>& alpha) const;
  /// The residual r-hat alone (no base, no alpha).
  Var<T> residual(Tape<T>& tape, const Var<T>& base) const;

  void collect(const std::string& prefix, NamedParams<T>& out) const;
  void zero_output();

 private:
  StageConfig cfg_;
  Linear<T> lift_;
  std::vector<FnoBlock<T>> fno_;
  std::vector<LocalBlock<T>> local_;
  Linear<T> q1_, q2_;
  WavenumberGrid grid_;
  Var<T> pos_;
};

template <typename T>
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  /// pseudo_hr [1,N,N] -> [1,N,N]
  virtual Var<T> forward(Tape<T>& tape, const Var<T>& pseudo_hr) const = 0;
  virtual NamedParams<T> parameters() const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual std::size_t resolution() const = 0;
  /// Zero every layer that writes the residual or the final output.
  virtual void zero_residual_outputs() = 0;

  std::size_t parameter_count() const;
};

template <typename T>
class SIMRNOModel final : public Reconstructor<T> {
 public:
  SIMRNOModel(const SimrConfig& cfg, std::uint64_t seed);

  Var<T> forward(Tape<T>& tape, const Var<T>& pseudo_hr) const override;
  NamedParams<T> parameters() const override;
  std::string kind() const override { return "simrno"; }
  nlohmann::json config_json() const override;
  std::size_t resolution() const override { return cfg_.resolution; }
  void zero_residual_outputs() override;

  const SimrConfig& config() const { return cfg_; }
  const SIMRStage<T>& stage1() const { return stage1_; }
  const SIMRStage<T>& stage2() const { return stage2_; }
  const Var<T>& alpha1() const { return alpha1_; }
  const Var<T>& alpha2() const { return alpha2_; }

 private:
  SimrConfig cfg_;
  SIMRStage<T> stage1_, stage2_;
  Conv3<T> h1_, h2_, h3_;
  Var<T> alpha1_, alpha2_;
};

template <typename T>
class FNOBaseline final : public Reconstructor<T> {
 public:
  FNOBaseline(const FnoConfig& cfg, std::uint64_t seed);

  Var<T> forward(Tape<T>& tape, const Var<T>& pseudo_hr) const override;
  NamedParams<T> parameters() const override;
  std::string kind() const override { return "fno"; }
  nlohmann::json config_json() const override;
  std::size_t resolution() const override { return cfg_.resolution; }
  void zero_residual_outputs() override;

  /// Output of spectral block `layer` alone (no bypass, no activation) for a
  /// lifted input; used to inspect the mode content.
  Var<T> spectral_block(Tape<T>& tape, std::size_t layer, const Var<T>& v) const;
  Var<T> lift(Tape<T>& tape, const Var<T>& pseudo_hr) const;

 private:
  FnoConfig cfg_;
  Linear<T> lift_;
  std::vector<FnoBlock<T>> blocks_;
  Linear<T> q1_, q2_;
  WavenumberGrid grid_;
  Var<T> pos_;
};

/// Returns the pseudo-HR field unchanged.
template <typename T>
class BicubicPassthrough final : public Reconstructor<T> {
 public:
  explicit BicubicPassthrough(std::size_t resolution) : res_(resolution) {}

  Var<T> forward(Tape<T>& tape, const Var<T>& pseudo_hr) const override;
  NamedParams<T> parameters() const override { return {}; }
  std::string kind() const override { return "bicubic"; }
  nlohmann::json config_json() const override { return {{"resolution", res_}}; }
  std::size_t resolution() const override { return res_; }
  void zero_residual_outputs() override {}

 private:
  std::size_t res_;
};

SimrConfig simr_config_from_json(const nlohmann::json& j);
FnoConfig fno_config_from_json(const nlohmann::json& j);

/// Build "simrno", "fno" or "bicubic" from {"kind":..., "config":{...}}.
template <typename T>
std::unique_ptr<Reconstructor<T>> make_model(const nlohmann::json& spec, std::uint64_t seed);

/// The interpolation cascade the SIMR-NO model reduces to with zeroed outputs.
template <typename T>
Tensor<T> interpolation_cascade(const Tensor<T>& pseudo_hr, const SimrConfig& cfg);

struct Checkpoint {
  nlohmann::json spec;  // {"kind", "config"}
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

template <typename T>
Checkpoint snapshot_parameters(const Reconstructor<T>& model);

/// Copy tensors into the model; throws CheckpointIncompatible naming every
/// missing, unexpected or mis-shaped tensor.
template <typename T>
void apply_checkpoint(Reconstructor<T>& model, const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const Reconstructor<T>& model, const std::filesystem::path& path);

/// Rebuild the model described by the checkpoint and load its parameters.
template <typename T>
std::unique_ptr<Reconstructor<T>> load_checkpoint(const std::filesystem::path& path);

/// FNV-1a digest over parameter names and raw values.
template <typename T>
std::string parameter_digest(const Reconstructor<T>& model);

}  // namespace simr
