#include "van/stopping.hpp"

#include <stdexcept>

#include "van/nn/ops.hpp"

namespace van {

using nn::Tensor;
using nn::Var;

StopStrategy parse_stop_strategy(std::string_view name) {
  if (name == "fixed") return StopStrategy::Fixed;
  if (name == "early") return StopStrategy::Early;
  if (name == "learned") return StopStrategy::Learned;
  throw std::invalid_argument("unknown stop strategy '" + std::string(name) + "' (expected fixed, early or learned)");
}

std::string to_string(StopStrategy strategy) {
  switch (strategy) {
    case StopStrategy::Fixed: return "fixed";
    case StopStrategy::Early: return "early";
    case StopStrategy::Learned: return "learned";
  }
  return "learned";
}

void StopConfig::validate() const {
  if (l_max < 1) throw std::invalid_argument("l_max must be at least 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
}

std::vector<StopTarget> stop_targets(std::size_t n_lines) {
  std::vector<StopTarget> targets(n_lines, StopTarget{0.0, 1.0});
  targets.push_back(StopTarget{1.0, 0.0});
  return targets;
}

Var cross_entropy(const Var& d, const StopTarget& target) {
  if (d.size() != 2) throw std::invalid_argument("cross_entropy: d must have two entries");
  Var total;
  for (std::size_t i = 0; i < 2; ++i) {
    if (target[i] == 0.0) continue;
    Var term = nn::scale(nn::log_clamped(nn::slice(d, 0, i, 1), kCrossEntropyFloor), -target[i]);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total.defined() ? total : nn::constant(Tensor::scalar(0.0));
}

namespace {

Var accumulate(Var total, const Var& term) { return total.defined() ? nn::add(total, term) : term; }

Var zero_if_undefined(const Var& v) { return v.defined() ? v : nn::constant(Tensor::scalar(0.0)); }

}  // namespace

Var ctc_sum(const std::vector<Var>& log_lattices, const std::vector<ctc::Labels>& targets) {
  static const ctc::Labels empty;
  Var total;
  for (std::size_t k = 0; k < log_lattices.size(); ++k) {
    total = accumulate(total, ctc::loss(log_lattices[k], k < targets.size() ? targets[k] : empty));
  }
  return zero_if_undefined(total);
}

Var stop_cross_entropy_sum(const std::vector<Var>& d_list) {
  if (d_list.empty()) throw std::invalid_argument("stop_cross_entropy_sum: no stop decisions");
  const std::vector<StopTarget> targets = stop_targets(d_list.size() - 1);
  Var total;
  for (std::size_t k = 0; k < d_list.size(); ++k) total = accumulate(total, cross_entropy(d_list[k], targets[k]));
  return total;
}

Var loss_fixed(const std::vector<Var>& log_lattices, const std::vector<ctc::Labels>& targets,
               const StopConfig& config) {
  if (log_lattices.size() != config.l_max) {
    throw std::invalid_argument("loss_fixed: expected l_max = " + std::to_string(config.l_max) + " lattices, got " +
                                std::to_string(log_lattices.size()));
  }
  if (targets.size() > config.l_max) throw std::invalid_argument("loss_fixed: more text lines than l_max");
  return ctc_sum(log_lattices, targets);
}

Var loss_early(const std::vector<Var>& log_lattices, const std::vector<ctc::Labels>& targets) {
  if (log_lattices.size() != targets.size() + 1) {
    throw std::invalid_argument("loss_early: expected L+1 = " + std::to_string(targets.size() + 1) + " lattices");
  }
  return ctc_sum(log_lattices, targets);
}

Var loss_learned(const std::vector<Var>& log_lattices, const std::vector<ctc::Labels>& targets,
                 const std::vector<Var>& d_list, const StopConfig& config) {
  if (log_lattices.size() != targets.size() || d_list.size() != targets.size() + 1) {
    throw std::invalid_argument("loss_learned: expected L lattices and L+1 stop decisions");
  }
  Var ce = stop_cross_entropy_sum(d_list);
  Var ctc_part = ctc_sum(log_lattices, targets);
  if (config.lambda == 0.0) return ctc_part;
  return nn::add(ctc_part, nn::scale(ce, config.lambda));
}

bool should_stop(StopStrategy strategy, std::size_t t, const Tensor& d, std::string_view decoded_line,
                 std::size_t l_max) {
  if (t > l_max) return true;
  switch (strategy) {
    case StopStrategy::Fixed: return false;
    case StopStrategy::Early: return decoded_line.empty();
    case StopStrategy::Learned:
      if (d.size() != 2) throw std::invalid_argument("should_stop: learned strategy needs d_t");
      // Ties go to the lower index, i.e. stop.
      return d[kStopIndex] >= d[kContinueIndex];
  }
  return true;
}

}  // namespace van
