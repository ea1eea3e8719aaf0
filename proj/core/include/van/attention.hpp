#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "van/nn/ops.hpp"
#include "van/parameters.hpp"

namespace van {

struct AttentionConfig {
  std::size_t c_f = 256;
  std::size_t c_h = 256;
  std::size_t c_u = 256;
  std::size_t c_j = 16;
  std::size_t context_kernel = 15;
  std::size_t stop_kernel = 5;
  std::size_t collapse_pool_target = 100;
  std::size_t stop_pool_target = 15;

  static AttentionConfig paper();
  static AttentionConfig desk();
  void validate() const;
};

/// Carried from one attention step to the next.
struct AttentionState {
  nn::Var alpha_prev;  // (H_f), zero at t = 1
  nn::Var coverage;    // (H_f), clamped to [0, 1]
  nn::LstmState decoder;

  static AttentionState initial(std::size_t h_f, std::size_t c_h);
};

struct AttentionStep {
  nn::Var line_features;  // l_t (W_f, C_f)
  nn::Var alpha;          // (H_f)
  nn::Var stop_probs;     // d_t (2): index 0 = stop, 1 = continue
  nn::Var scores;         // s_t (H_f, C_u)
};

/// Clamped running sum of attention weights.
nn::Var update_coverage(const nn::Var& coverage_prev, const nn::Var& alpha);

/// Vertical weighted sum of feature rows: f (H_f, W_f, C_f), alpha (H_f) -> (W_f, C_f).
nn::Var line_features(const nn::Var& features, const nn::Var& alpha);

class Attention {
 public:
  Attention(const AttentionConfig& config, ParameterStore& store, Rng& init_rng,
            const std::string& prefix = "attention.");

  const AttentionConfig& config() const { return config_; }

  /// f (H_f, W_f, C_f) -> f' (H_f, C_f).
  nn::Var collapse_horizontal(const nn::Var& features) const;
  /// (alpha_{t-1}, c_{t-1}) -> j_t (H_f, C_j).
  nn::Var context_features(const nn::Var& alpha_prev, const nn::Var& coverage) const;
  /// Returns (alpha_t, s_t).
  std::pair<nn::Var, nn::Var> attention_weights(const nn::Var& f_prime, const nn::Var& context,
                                                const nn::Var& h_prev) const;
  /// d_t from s_t and a decoder hidden state.
  nn::Var stop_head(const nn::Var& scores, const nn::Var& hidden) const;

  AttentionStep step(const nn::Var& features, const nn::Var& f_prime, const AttentionState& state) const;

 private:
  AttentionConfig config_;
  nn::Var collapse_weight_;   // (P)
  nn::Var context_weight_;    // (k, 1, 2, C_j)
  nn::Var context_bias_;      // (C_j)
  nn::Var context_gamma_, context_beta_;
  nn::Var proj_features_;     // (C_f, C_u)
  nn::Var proj_context_;      // (C_j, C_u)
  nn::Var proj_hidden_;       // (C_h, C_u)
  nn::Var score_weight_;      // (C_u, 1)
  nn::Var stop_conv_weight_;  // (k, 1, C_u, C_f)
  nn::Var stop_conv_bias_;    // (C_f)
  nn::Var stop_collapse_;     // (Q)
  nn::Var stop_weight_;       // (C_f + C_h, 2)
};

}  // namespace van
