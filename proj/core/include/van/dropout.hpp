#pragma once

#include <cstddef>
#include <vector>

#include "van/nn/var.hpp"
#include "van/random.hpp"

namespace van {

struct DropoutConfig {
  double p_std = 0.5;      // standard mode: each scalar dropped independently
  double p_spatial = 0.25; // spatial (2d) mode: whole channels dropped
  double mode_prob = 0.5;  // chance of picking the standard mode
  std::size_t n_locations = 3;

  void validate() const;
};

enum class DropoutMode { Standard, Spatial };

/// Applies one randomly chosen dropout mode (inverted scaling). Identity
/// outside training. The channel axis is the last axis.
nn::Var mix_dropout(const nn::Var& x, const DropoutConfig& config, Rng& rng, bool training);

/// Same as mix_dropout with the mode fixed by the caller.
nn::Var dropout(const nn::Var& x, DropoutMode mode, double p, Rng& rng);

/// Picks one of config.n_locations uniformly.
std::size_t pick_dropout_location(const DropoutConfig& config, Rng& rng);

/// Applies mix_dropout to exactly one of the candidate tensors, chosen
/// uniformly; returns the chosen index through `chosen` when non-null.
std::vector<nn::Var> diffused_mix_dropout(const std::vector<nn::Var>& candidates, const DropoutConfig& config,
                                          Rng& rng, bool training, std::size_t* chosen = nullptr);

}  // namespace van
