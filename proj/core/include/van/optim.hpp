#pragma once

#include <cstddef>
#include <vector>

#include "van/parameters.hpp"

namespace van {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  void validate() const;
};

/// Adam over every parameter of a store, consuming their accumulated gradients.
class Adam {
 public:
  Adam(const ParameterStore& store, const AdamConfig& config);

  /// Applies one update and clears the gradients. Returns the gradient norm
  /// before clipping.
  double step();
  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  const ParameterStore& store_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace van
