#include "van/attention.hpp"

#include <stdexcept>

namespace van {

using nn::Padding;
using nn::Tensor;
using nn::Var;

AttentionConfig AttentionConfig::paper() { return AttentionConfig{}; }

AttentionConfig AttentionConfig::desk() {
  AttentionConfig c;
  c.c_f = 128;
  c.c_h = 128;
  c.c_u = 128;
  c.collapse_pool_target = 32;
  c.stop_pool_target = 5;
  return c;
}

void AttentionConfig::validate() const {
  if (c_f == 0 || c_h == 0 || c_u == 0 || c_j == 0) throw std::invalid_argument("attention widths must be positive");
  if (context_kernel % 2 == 0 || stop_kernel % 2 == 0) throw std::invalid_argument("attention kernels must be odd");
  if (collapse_pool_target == 0 || stop_pool_target == 0) throw std::invalid_argument("pool targets must be positive");
}

AttentionState AttentionState::initial(std::size_t h_f, std::size_t c_h) {
  return {Var(Tensor({h_f}, 0.0)), Var(Tensor({h_f}, 0.0)), {Var(Tensor({c_h}, 0.0)), Var(Tensor({c_h}, 0.0))}};
}

Var update_coverage(const Var& coverage_prev, const Var& alpha) {
  return nn::clamp(nn::add(coverage_prev, alpha), 0.0, 1.0);
}

Var line_features(const Var& features, const Var& alpha) {
  if (features.value().rank() != 3 || alpha.size() != features.shape()[0]) {
    throw std::invalid_argument("line_features: alpha length must equal feature height");
  }
  return nn::weighted_sum(features, alpha, 0);
}

Attention::Attention(const AttentionConfig& config, ParameterStore& store, Rng& init_rng, const std::string& prefix)
    : config_(config) {
  config_.validate();
  const auto& c = config_;
  const std::size_t p = c.collapse_pool_target, q = c.stop_pool_target;
  collapse_weight_ = store.add(prefix + "collapse.weight", fan_in_uniform({p}, p, init_rng));
  context_weight_ =
      store.add(prefix + "context.conv.weight", fan_in_uniform({c.context_kernel, 1, 2, c.c_j}, 2 * c.context_kernel, init_rng));
  context_bias_ = store.add(prefix + "context.conv.bias", Tensor({c.c_j}, 0.0));
  context_gamma_ = store.add(prefix + "context.norm.gamma", Tensor({c.c_j}, 1.0));
  context_beta_ = store.add(prefix + "context.norm.beta", Tensor({c.c_j}, 0.0));
  proj_features_ = store.add(prefix + "proj.features", fan_in_uniform({c.c_f, c.c_u}, c.c_f, init_rng));
  proj_context_ = store.add(prefix + "proj.context", fan_in_uniform({c.c_j, c.c_u}, c.c_j, init_rng));
  proj_hidden_ = store.add(prefix + "proj.hidden", fan_in_uniform({c.c_h, c.c_u}, c.c_h, init_rng));
  score_weight_ = store.add(prefix + "score.weight", fan_in_uniform({c.c_u, 1}, c.c_u, init_rng));
  stop_conv_weight_ =
      store.add(prefix + "stop.conv.weight", fan_in_uniform({c.stop_kernel, 1, c.c_u, c.c_f}, c.stop_kernel * c.c_u, init_rng));
  stop_conv_bias_ = store.add(prefix + "stop.conv.bias", Tensor({c.c_f}, 0.0));
  stop_collapse_ = store.add(prefix + "stop.collapse.weight", fan_in_uniform({q}, q, init_rng));
  stop_weight_ = store.add(prefix + "stop.weight", fan_in_uniform({c.c_f + c.c_h, 2}, c.c_f + c.c_h, init_rng));
}

Var Attention::collapse_horizontal(const Var& features) const {
  const nn::Shape& s = features.shape();
  if (s.size() != 3 || s[2] != config_.c_f) {
    throw std::invalid_argument("collapse_horizontal: features must be (H_f, W_f, " + std::to_string(config_.c_f) +
                                "), got " + nn::shape_string(s));
  }
  Var pooled = nn::adaptive_max_pool(features, config_.collapse_pool_target, 1);
  return nn::weighted_sum(pooled, collapse_weight_, 1);
}

Var Attention::context_features(const Var& alpha_prev, const Var& coverage) const {
  const std::size_t h_f = alpha_prev.size();
  Var stacked = nn::concat({nn::reshape(alpha_prev, {h_f, 1}), nn::reshape(coverage, {h_f, 1})}, 1);
  Var conv = nn::conv2d(nn::reshape(stacked, {h_f, 1, 2}), context_weight_, context_bias_, {1, 1}, Padding::Same);
  Var normed = nn::instance_norm2d(conv, context_gamma_, context_beta_);
  return nn::reshape(normed, {h_f, config_.c_j});
}

std::pair<Var, Var> Attention::attention_weights(const Var& f_prime, const Var& context, const Var& h_prev) const {
  const std::size_t h_f = f_prime.shape()[0];
  if (context.shape() != nn::Shape{h_f, config_.c_j}) {
    throw std::invalid_argument("attention_weights: context shape " + nn::shape_string(context.shape()));
  }
  Var pre = nn::add(nn::dense(f_prime, proj_features_), nn::dense(context, proj_context_));
  Var scores = nn::tanh(nn::add_broadcast(pre, nn::dense(h_prev, proj_hidden_)));
  Var energies = nn::reshape(nn::dense(scores, score_weight_), {h_f});
  return {nn::softmax(energies), scores};
}

Var Attention::stop_head(const Var& scores, const Var& hidden) const {
  const std::size_t h_f = scores.shape()[0];
  if (h_f < config_.stop_pool_target) {
    throw std::invalid_argument("stop_head: feature height " + std::to_string(h_f) + " below stop pool target " +
                                std::to_string(config_.stop_pool_target));
  }
  Var conv = nn::conv2d(nn::reshape(scores, {h_f, 1, config_.c_u}), stop_conv_weight_, stop_conv_bias_, {1, 1},
                        Padding::Same);
  Var pooled = nn::adaptive_max_pool(nn::reshape(conv, {h_f, config_.c_f}), config_.stop_pool_target, 0);
  Var summary = nn::weighted_sum(pooled, stop_collapse_, 0);
  Var joined = nn::concat({summary, hidden}, 0);
  return nn::softmax(nn::dense(joined, stop_weight_));
}

AttentionStep Attention::step(const Var& features, const Var& f_prime, const AttentionState& state) const {
  Var context = context_features(state.alpha_prev, state.coverage);
  auto [alpha, scores] = attention_weights(f_prime, context, state.decoder.h);
  Var lines = line_features(features, alpha);
  Var stop = stop_head(scores, state.decoder.h);
  return {lines, alpha, stop, scores};
}

}  // namespace van
