#pragma once

// MSE objective, Adam with step decay, global-norm clipping and the epoch
// loop with best-checkpoint restore.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "simr/data.hpp"
#include "simr/diagnostics.hpp"
#include "simr/model.hpp"

namespace simr {

enum class ValidationMode { test_set, holdout };

struct TrainConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t step_size = 80;
  double gamma = 0.5;
  double clip = 1.0;
  std::size_t epochs = 300;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  ValidationMode validation = ValidationMode::test_set;
  // Fraction of the training pairs held out in holdout mode.
  double holdout_fraction = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const TrainConfig&) const = default;
};

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where = "train");

/// lr * gamma^floor(epoch / step_size), epoch counted from 0.
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

/// Mean of squared differences, a scalar.
template <typename T>
Var<T> mse_loss(Tape<T>& tape, const Var<T>& pred, const Var<T>& truth);

/// Scales every gradient by delta / g when the global norm g exceeds delta.
/// Returns the factor applied (1 when unchanged).
template <typename T>
double clip_grad_norm(const std::vector<Var<T>>& params, double delta);

template <typename T>
double global_grad_norm(const std::vector<Var<T>>& params);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::uint64_t t = 0;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<Var<T>>& params);

/// One bias-corrected Adam update from the accumulated gradients.
template <typename T>
void adam_step(const std::vector<Var<T>>& params, AdamState<T>& state, double lr, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  double wall_seconds = 0.0;
  std::string validation_mode;
  std::size_t n_train = 0, n_val = 0;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place and leaves the parameters of the best validation epoch
/// loaded in the model.
template <typename T>
TrainReport train(Reconstructor<T>& model, const std::vector<SamplePair>& train_pairs,
                  const std::vector<SamplePair>& val_pairs, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Model prediction for one pair, [1,N,N].
template <typename T>
Tensor<T> predict(const Reconstructor<T>& model, const SamplePair& pair);

/// Per-sample metrics against the truth; parameters are not touched.
template <typename T>
std::vector<MetricsRecord> evaluate(const Reconstructor<T>& model, const std::vector<SamplePair>& pairs,
                                    const SsimOptions& options = {});

/// Mean per-element MSE over pairs.
template <typename T>
double validation_mse(const Reconstructor<T>& model, const std::vector<SamplePair>& pairs);

}  // namespace simr
