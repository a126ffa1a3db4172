#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Var is a shared handle to a value and (optionally) its gradient. Leaves
// created with requires_grad (model parameters) outlive any tape; every
// operation executed through a recording Tape appends one entry holding the
// closure that maps the output gradient onto its inputs. Tape::backward walks
// the entries once, newest first.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "simr/errors.hpp"
#include "simr/tensor.hpp"

namespace simr {

enum class Precision { single, double_precision };

template <typename T>
constexpr Precision precision_of() {
  return sizeof(T) == sizeof(float) ? Precision::single : Precision::double_precision;
}

template <typename T>
class Tape;

template <typename T>
struct VarNode {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  const Tape<T>* tape = nullptr;  // producer, null for leaves
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<VarNode<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var parameter(Tensor<T> value) { return Var(std::move(value), true); }
  static Var constant(Tensor<T> value) { return Var(std::move(value), false); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  T item() const {
    if (node_->value.size() != 1) throw DimensionError("item() on non-scalar " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }

  /// Gradient; zeros of the value's shape if nothing has been accumulated yet.
  const Tensor<T>& grad() const {
    ensure_grad();
    return node_->grad;
  }
  Tensor<T>& grad_buffer() const {
    ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(T{0});
  }

  /// Fresh leaf sharing nothing with this handle.
  Var detach() const { return Var(node_->value, false); }

  bool same_node(const Var& other) const noexcept { return node_ == other.node_; }

 private:
  void ensure_grad() const {
    if (node_->grad.empty() && !node_->value.empty()) node_->grad = Tensor<T>(node_->value.shape());
    if (node_->grad.shape() != node_->value.shape()) node_->grad = Tensor<T>(node_->value.shape());
  }

  std::shared_ptr<VarNode<T>> node_;
  friend class Tape<T>;
};

template <typename T>
class Tape {
 public:
  enum class Mode { record, inference };
  using BackwardFn = std::function<void(const Tensor<T>& out_grad)>;

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }
  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Wrap an operation result. The backward closure is recorded only when
  /// the tape is recording and at least one input needs a gradient.
  Var<T> emit(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    return emit(std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
  }

  Var<T> emit(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    Var<T> out(std::move(value), needs && recording());
    if (out.requires_grad()) {
      out.node_->tape = this;
      entries_.push_back({out.node_, std::move(backward)});
    }
    return out;
  }

  /// Accumulate d(loss)/d(leaf) into every requires_grad leaf reachable from
  /// loss. Intermediate gradients are reset first so that repeated calls
  /// accumulate into leaves additively.
  void backward(const Var<T>& loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw UsageError("backward() needs a scalar loss");
    }
    if (!loss.requires_grad() || loss.node_->tape != this) {
      throw UsageError("backward() on a tensor that is not connected to this tape");
    }
    std::size_t end = entries_.size();
    while (end > 0 && entries_[end - 1].output != loss.node_) --end;
    if (end == 0) throw UsageError("loss was not produced by this tape");

    for (std::size_t i = 0; i < end; ++i) {
      auto& g = entries_[i].output->grad;
      if (!g.empty()) g.fill(T{0});
    }
    loss.node_->grad = Tensor<T>(loss.shape(), T{1});
    for (std::size_t i = end; i-- > 0;) {
      const auto& entry = entries_[i];
      if (entry.output->grad.empty()) continue;  // not on a path to the loss
      entry.backward(entry.output->grad);
    }
  }

 private:
  struct Entry {
    std::shared_ptr<VarNode<T>> output;
    BackwardFn backward;
  };

  Mode mode_;
  std::vector<Entry> entries_;
};

/// Accumulate g into v's gradient when v participates in differentiation.
template <typename T>
inline void accumulate_grad(const Var<T>& v, const Tensor<T>& g) {
  if (v.requires_grad()) v.grad_buffer() += g;
}

struct GradCheckOptions {
  // Step of the fourth-order central difference.
  double step = 1e-3;
  double tol = 1e-4;
  // Denominator floor for the relative discrepancy.
  double floor = 1e-8;
  // Number of randomly chosen entries probed per parameter tensor (0 = all).
  std::size_t max_entries = 0;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probed = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_error = 0.0;
  bool pass = false;
};

using ScalarFn = std::function<Var<double>(Tape<double>&)>;

/// Compare tape gradients with fourth-order central finite differences. The function must
/// rebuild its graph on every call.
GradCheckReport grad_check(const ScalarFn& fn, std::vector<std::pair<std::string, Var<double>>> params,
                           const GradCheckOptions& options = {});

}  // namespace simr
