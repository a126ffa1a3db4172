#include "simr/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace simr {

namespace {

template <typename T>
std::vector<Var<T>> param_list(const Reconstructor<T>& model) {
  std::vector<Var<T>> out;
  for (const auto& [name, v] : model.parameters()) out.push_back(v);
  return out;
}

template <typename T>
Var<T> as_input(const Tensor<float>& field) {
  return Var<T>::constant(field.cast<T>().reshaped({1, field.dim(0), field.dim(1)}));
}

void shuffle(std::vector<std::size_t>& order, UniformStream& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = std::min(static_cast<std::size_t>(rng.next(0.0, static_cast<double>(i))), i - 1);
    std::swap(order[i - 1], order[j]);
  }
}

double get_double(const nlohmann::json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

std::size_t get_size(const nlohmann::json& j, const char* key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

void TrainConfig::validate() const {
  const auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("train.") + key + ": must be positive");
  };
  positive(lr, "lr");
  positive(adam_eps, "adam_eps");
  positive(gamma, "gamma");
  positive(clip, "clip");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1: must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2: must lie in (0, 1)");
  if (step_size == 0) throw ConfigError("train.step_size: must be positive");
  if (epochs == 0) throw ConfigError("train.epochs: must be positive");
  if (batch == 0) throw ConfigError("train.batch: must be positive");
  if (eval_every == 0) throw ConfigError("train.eval_every: must be positive");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("train.holdout_fraction: must lie in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"betas", {beta1, beta2}},
          {"adam_eps", adam_eps},
          {"step_size", step_size},
          {"gamma", gamma},
          {"clip", clip},
          {"epochs", epochs},
          {"batch", batch},
          {"seed", seed},
          {"eval_every", eval_every},
          {"validation", validation == ValidationMode::test_set ? "test_set" : "holdout"},
          {"holdout_fraction", holdout_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  static const char* keys[] = {"lr",    "betas", "adam_eps", "step_size",  "gamma",           "clip",
                               "epochs", "batch", "seed",     "eval_every", "validation", "holdout_fraction"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw ConfigError(where + "." + it.key() + ": unknown key");
    }
  }
  TrainConfig d, c;
  c.lr = get_double(j, "lr", d.lr, where);
  if (j.contains("betas")) {
    const auto& b = j.at("betas");
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      throw ConfigError(where + ".betas: expected two numbers");
    }
    c.beta1 = b[0].get<double>();
    c.beta2 = b[1].get<double>();
  }
  c.adam_eps = get_double(j, "adam_eps", d.adam_eps, where);
  c.step_size = get_size(j, "step_size", d.step_size, where);
  c.gamma = get_double(j, "gamma", d.gamma, where);
  c.clip = get_double(j, "clip", d.clip, where);
  c.epochs = get_size(j, "epochs", d.epochs, where);
  c.batch = get_size(j, "batch", d.batch, where);
  c.seed = get_size(j, "seed", d.seed, where);
  c.eval_every = get_size(j, "eval_every", d.eval_every, where);
  if (j.contains("validation")) {
    const auto& v = j.at("validation");
    if (v == "test_set") {
      c.validation = ValidationMode::test_set;
    } else if (v == "holdout") {
      c.validation = ValidationMode::holdout;
    } else {
      throw ConfigError(where + ".validation: expected \"test_set\" or \"holdout\"");
    }
  }
  c.holdout_fraction = get_double(j, "holdout_fraction", d.holdout_fraction, where);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (where != "train" && msg.rfind("train.", 0) == 0) msg = where + msg.substr(5);
    throw ConfigError(msg);
  }
  return c;
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_size));
}

template <typename T>
Var<T> mse_loss(Tape<T>& tape, const Var<T>& pred, const Var<T>& truth) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_str(pred.shape()) + " vs truth " + shape_str(truth.shape()));
  }
  return scale(tape, sum_squares(tape, sub(tape, pred, truth)), T(1) / static_cast<T>(pred.size()));
}

template <typename T>
double global_grad_norm(const std::vector<Var<T>>& params) {
  double s = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad().values()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

template <typename T>
double clip_grad_norm(const std::vector<Var<T>>& params, double delta) {
  if (!(delta > 0.0)) throw ConfigError("clip_grad_norm: delta must be positive");
  const double norm = global_grad_norm(params);
  if (!(norm > delta)) return 1.0;
  const double factor = delta / norm;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (auto& g : p.grad_buffer().values()) g = static_cast<T>(g * factor);
  }
  return factor;
}

template <typename T>
AdamState<T> make_adam_state(const std::vector<Var<T>>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

template <typename T>
void adam_step(const std::vector<Var<T>>& params, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state does not match parameter list");
  state.t += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Var<T> param = params[p];
    if (!param.has_grad()) continue;
    const auto& g = param.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    auto& x = param.mutable_value();
    if (m.shape() != x.shape()) throw DimensionError("adam_step: moment shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      x[i] = static_cast<T>(static_cast<double>(x[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps));
    }
  }
}

std::string TrainReport::to_csv() const {
  std::ostringstream s;
  s << "epoch,train_mse,val_mse,lr\n";
  for (const auto& e : epochs) {
    s << e.epoch << ',' << format_number(e.train_mse) << ',' << format_number(e.val_mse) << ',' << format_number(e.lr)
      << '\n';
  }
  return s.str();
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["best_val_mse"] = best_val_mse;
  j["wall_seconds"] = wall_seconds;
  j["validation_mode"] = validation_mode;
  j["n_train"] = n_train;
  j["n_val"] = n_val;
  j["epochs"] = epochs.size();
  if (!epochs.empty()) {
    j["first_train_mse"] = epochs.front().train_mse;
    j["final_train_mse"] = epochs.back().train_mse;
  }
  return j;
}

template <typename T>
Tensor<T> predict(const Reconstructor<T>& model, const SamplePair& pair) {
  Tape<T> tape(Tape<T>::Mode::inference);
  return model.forward(tape, as_input<T>(pair.pseudo_hr)).value();
}

template <typename T>
double validation_mse(const Reconstructor<T>& model, const std::vector<SamplePair>& pairs) {
  if (pairs.empty()) throw ConfigError("validation needs at least one pair");
  double s = 0.0;
  for (const auto& p : pairs) s += mse(predict(model, p), p.truth.cast<T>().reshaped({1, p.truth.dim(0), p.truth.dim(1)}));
  return s / static_cast<double>(pairs.size());
}

template <typename T>
std::vector<MetricsRecord> evaluate(const Reconstructor<T>& model, const std::vector<SamplePair>& pairs,
                                    const SsimOptions& options) {
  if (pairs.empty()) throw ConfigError("evaluate needs at least one pair");
  std::vector<MetricsRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Tensor<double> pred = predict(model, p).template cast<double>().reshaped({p.truth.dim(0), p.truth.dim(1)});
    out.push_back(compute_metrics(pred, p.truth.cast<double>(), p.index, options));
  }
  return out;
}

template <typename T>
TrainReport train(Reconstructor<T>& model, const std::vector<SamplePair>& train_pairs,
                  const std::vector<SamplePair>& val_pairs, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  UniformStream rng(cfg.seed);

  std::vector<SamplePair> fit = train_pairs, val = val_pairs;
  TrainReport report;
  if (cfg.validation == ValidationMode::holdout) {
    std::vector<std::size_t> order(fit.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.holdout_fraction * fit.size())));
    if (n_val >= fit.size()) throw ConfigError("holdout validation leaves no training pairs");
    std::vector<std::size_t> vi(order.begin(), order.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> ti(order.begin() + static_cast<long>(n_val), order.end());
    std::sort(vi.begin(), vi.end());
    std::sort(ti.begin(), ti.end());
    val = select(train_pairs, vi);
    fit = select(train_pairs, ti);
    report.validation_mode = "holdout";
  } else {
    report.validation_mode = "test_set";
  }
  if (fit.empty() || val.empty()) throw ConfigError("train needs nonempty training and validation sets");
  report.n_train = fit.size();
  report.n_val = val.size();

  auto named = model.parameters();
  const auto params = param_list(model);
  auto adam = make_adam_state(params);
  std::vector<Tensor<T>> best;
  bool have_best = false;

  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch, ++batch_index) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      const T inv_batch = T(1) / static_cast<T>(b1 - b0);
      for (auto& p : named) p.second.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t s = b0; s < b1; ++s) {
        const SamplePair& pair = fit[order[s]];
        Tape<T> tape;
        auto pred = model.forward(tape, as_input<T>(pair.pseudo_hr));
        auto loss = mse_loss(tape, pred, as_input<T>(pair.truth));
        batch_loss += static_cast<double>(loss.item());
        if (!pred.requires_grad()) continue;
        tape.backward(scale(tape, loss, inv_batch));
      }
      const double grad_norm = global_grad_norm(params);
      if (!std::isfinite(batch_loss) || !std::isfinite(grad_norm)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch + 1 << ", batch " << batch_index + 1
            << " (loss sum " << batch_loss << ", gradient norm " << grad_norm << ")";
        throw TrainingDiverged(msg.str());
      }
      loss_sum += batch_loss;
      if (params.empty()) continue;
      clip_grad_norm(params, cfg.clip);
      adam_step(params, adam, lr, cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_mse = loss_sum / static_cast<double>(fit.size());
    const bool eval_now = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
    rec.val_mse = eval_now ? validation_mse(model, val) : std::nan("");
    report.epochs.push_back(rec);
    if (eval_now && (!have_best || rec.val_mse < report.best_val_mse)) {
      have_best = true;
      report.best_val_mse = rec.val_mse;
      report.best_epoch = rec.epoch;
      best.clear();
      for (const auto& p : params) best.push_back(p.value());
    }
    if (on_epoch) on_epoch(rec);
  }

  for (std::size_t i = 0; i < best.size(); ++i) {
    Var<T> p = params[i];
    p.mutable_value() = best[i];
  }
  for (auto& p : named) p.second.zero_grad();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

#define SIMR_INSTANTIATE_TRAIN(T)                                                                                \
  template Var<T> mse_loss<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                           \
  template double global_grad_norm<T>(const std::vector<Var<T>>&);                                               \
  template double clip_grad_norm<T>(const std::vector<Var<T>>&, double);                                         \
  template AdamState<T> make_adam_state<T>(const std::vector<Var<T>>&);                                          \
  template void adam_step<T>(const std::vector<Var<T>>&, AdamState<T>&, double, const TrainConfig&);             \
  template TrainReport train<T>(Reconstructor<T>&, const std::vector<SamplePair>&, const std::vector<SamplePair>&, \
                                const TrainConfig&, const EpochCallback&);                                       \
  template Tensor<T> predict<T>(const Reconstructor<T>&, const SamplePair&);                                     \
  template std::vector<MetricsRecord> evaluate<T>(const Reconstructor<T>&, const std::vector<SamplePair>&,       \
                                                  const SsimOptions&);                                           \
  template double validation_mse<T>(const Reconstructor<T>&, const std::vector<SamplePair>&);

SIMR_INSTANTIATE_TRAIN(float)
SIMR_INSTANTIATE_TRAIN(double)

}  // namespace simr
