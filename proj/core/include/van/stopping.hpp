#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "van/ctc.hpp"
#include "van/nn/var.hpp"

namespace van {

enum class StopStrategy { Fixed, Early, Learned };

StopStrategy parse_stop_strategy(std::string_view name);
std::string to_string(StopStrategy strategy);

struct StopConfig {
  StopStrategy strategy = StopStrategy::Learned;
  std::size_t l_max = 30;
  double lambda = 1.0;

  void validate() const;
};

inline constexpr std::size_t kStopIndex = 0;
inline constexpr std::size_t kContinueIndex = 1;
inline constexpr double kCrossEntropyFloor = 1e-12;

/// One-hot (stop, continue).
using StopTarget = std::array<double, 2>;

/// (0,1) for the L text lines, then (1,0).
std::vector<StopTarget> stop_targets(std::size_t n_lines);

/// -sum delta_i ln max(d_i, 1e-12).
nn::Var cross_entropy(const nn::Var& d, const StopTarget& target);

/// Sum of per-line CTC losses; lattices are per-frame log-probabilities.
/// Lines past the end of `targets` are scored against the empty string.
nn::Var ctc_sum(const std::vector<nn::Var>& log_lattices, const std::vector<ctc::Labels>& targets);

/// Sum of stop cross-entropies against stop_targets(d_list.size() - 1).
nn::Var stop_cross_entropy_sum(const std::vector<nn::Var>& d_list);

nn::Var loss_fixed(const std::vector<nn::Var>& log_lattices, const std::vector<ctc::Labels>& targets,
                   const StopConfig& config);
nn::Var loss_early(const std::vector<nn::Var>& log_lattices, const std::vector<ctc::Labels>& targets);
nn::Var loss_learned(const std::vector<nn::Var>& log_lattices, const std::vector<ctc::Labels>& targets,
                     const std::vector<nn::Var>& d_list, const StopConfig& config);

/// Prediction loop guard at step t (1-based). `d` may be empty for strategies
/// that do not use it.
bool should_stop(StopStrategy strategy, std::size_t t, const nn::Tensor& d, std::string_view decoded_line,
                 std::size_t l_max);

}  // namespace van
