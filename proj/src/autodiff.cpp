#include "simr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace simr {

GradCheckReport grad_check(const ScalarFn& fn, std::vector<std::pair<std::string, Var<double>>> params,
                           const GradCheckOptions& options) {
  for (auto& [name, p] : params) p.zero_grad();
  {
    Tape<double> tape;
    auto loss = fn(tape);
    tape.backward(loss);
  }

  const auto eval = [&fn]() {
    Tape<double> tape(Tape<double>::Mode::inference);
    return fn(tape).item();
  };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (auto& [name, p] : params) {
    const Tensor<double> analytic = p.grad();
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_entries != 0 && idx.size() > options.max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_entries);
    }
    GradCheckEntry entry{name, 0.0, idx.size()};
    for (std::size_t i : idx) {
      double& x = p.mutable_value()[i];
      const double saved = x, h = options.step;
      const auto at = [&](double offset) {
        x = saved + offset;
        return eval();
      };
      const double near = at(h) - at(-h), far = at(2 * h) - at(-2 * h);
      x = saved;
      const double numeric = (8.0 * near - far) / (12.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), options.floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(numeric - analytic[i]) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace simr
