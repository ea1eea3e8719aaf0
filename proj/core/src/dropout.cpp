#include "van/dropout.hpp"

#include <stdexcept>
#include <string>

#include "van/nn/ops.hpp"

namespace van {

void DropoutConfig::validate() const {
  for (double p : {p_std, p_spatial, mode_prob}) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("dropout probabilities must lie in [0, 1]");
  }
  if (p_std >= 1.0 || p_spatial >= 1.0) throw std::invalid_argument("dropout probability must be below 1");
  if (n_locations == 0) throw std::invalid_argument("dropout needs at least one location");
}

nn::Var dropout(const nn::Var& x, DropoutMode mode, double p, Rng& rng) {
  if (p <= 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  nn::Tensor mask(x.shape());
  if (mode == DropoutMode::Standard) {
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
  } else {
    const std::size_t channels = x.shape().back();
    std::vector<double> channel_mask(channels);
    for (double& m : channel_mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = channel_mask[i % channels];
  }
  return nn::mask_multiply(x, mask);
}

nn::Var mix_dropout(const nn::Var& x, const DropoutConfig& config, Rng& rng, bool training) {
  if (!training) return x;
  if (rng.bernoulli(config.mode_prob)) return dropout(x, DropoutMode::Standard, config.p_std, rng);
  return dropout(x, DropoutMode::Spatial, config.p_spatial, rng);
}

std::size_t pick_dropout_location(const DropoutConfig& config, Rng& rng) {
  return static_cast<std::size_t>(rng.below(config.n_locations));
}

std::vector<nn::Var> diffused_mix_dropout(const std::vector<nn::Var>& candidates, const DropoutConfig& config,
                                          Rng& rng, bool training, std::size_t* chosen) {
  if (candidates.size() != config.n_locations) {
    throw std::invalid_argument("diffused_mix_dropout: expected " + std::to_string(config.n_locations) +
                                " candidate tensors, got " + std::to_string(candidates.size()));
  }
  std::vector<nn::Var> out = candidates;
  if (!training) return out;
  const std::size_t where = pick_dropout_location(config, rng);
  if (chosen) *chosen = where;
  out[where] = mix_dropout(candidates[where], config, rng, true);
  return out;
}

}  // namespace van
