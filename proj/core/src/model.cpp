#include "van/model.hpp"

#include <stdexcept>

namespace van {

using nn::Tensor;
using nn::Var;

ModelConfig ModelConfig::paper() {
  return {"paper", EncoderConfig::paper(), AttentionConfig::paper()};
}

ModelConfig ModelConfig::desk() { return {"desk", EncoderConfig::desk(), AttentionConfig::desk()}; }

ModelConfig ModelConfig::from_preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw std::invalid_argument("unknown model preset '" + name + "' (expected paper or desk)");
}

void ModelConfig::validate() const {
  encoder.validate();
  attention.validate();
  if (encoder.c_f != attention.c_f) throw std::invalid_argument("encoder and attention disagree on c_f");
}

PreprocessConfig ModelConfig::preprocess(bool downscale) const {
  return {downscale, 32 * attention.stop_pool_target, 8 * attention.collapse_pool_target};
}

VanModel::VanModel(const ModelConfig& config, const Alphabet& alphabet, std::uint64_t init_seed)
    : config_(config), alphabet_(alphabet) {
  config_.validate();
  if (alphabet_.size() == 0) throw std::invalid_argument("VanModel: empty alphabet");
  Rng rng(init_seed);
  encoder_ = std::make_unique<Encoder>(config_.encoder, store_, rng);
  attention_ = std::make_unique<Attention>(config_.attention, store_, rng);
  decoder_ = std::make_unique<Decoder>(config_.attention.c_f, config_.attention.c_h, alphabet_.classes(), store_, rng);
}

LineModel::LineModel(const ModelConfig& config, const Alphabet& alphabet, std::uint64_t init_seed)
    : config_(config), alphabet_(alphabet) {
  config_.validate();
  if (alphabet_.size() == 0) throw std::invalid_argument("LineModel: empty alphabet");
  Rng rng(init_seed);
  encoder_ = std::make_unique<Encoder>(config_.encoder, store_, rng);
  const std::size_t c_f = config_.encoder.c_f;
  output_weight_ = store_.add("output.weight", fan_in_uniform({c_f, alphabet_.classes()}, c_f, rng));
  output_bias_ = store_.add("output.bias", Tensor({alphabet_.classes()}, 0.0));
}

Var LineModel::forward(const Var& image, Mode mode, Rng* rng) const {
  Var features = encoder_->encode(image, mode, rng);
  const std::size_t w_f = features.shape()[1], c_f = features.shape()[2];
  Var collapsed = nn::reshape(nn::adaptive_max_pool(features, 1, 0), {w_f, c_f});
  return nn::log_softmax(nn::dense(collapsed, output_weight_, output_bias_));
}

void transfer_weights(const LineModel& line_model, VanModel& van) {
  std::vector<std::pair<std::string, std::string>> mapping;
  for (const auto& [name, value] : line_model.parameters().items()) {
    if (name.rfind("encoder.", 0) == 0) mapping.emplace_back(name, name);
  }
  mapping.emplace_back("output.weight", "decoder.output.weight");
  mapping.emplace_back("output.bias", "decoder.output.bias");

  std::vector<std::string> problems;
  for (const auto& [from, to] : mapping) {
    if (!van.parameters().contains(to)) {
      problems.push_back(to + " (missing in the paragraph model)");
      continue;
    }
    const nn::Shape& src = line_model.parameters().get(from).shape();
    const nn::Shape& dst = van.parameters().get(to).shape();
    if (src != dst) problems.push_back(to + " (" + nn::shape_string(src) + " vs " + nn::shape_string(dst) + ")");
  }
  for (const auto& [name, value] : van.parameters().items()) {
    if (name.rfind("encoder.", 0) == 0 && !line_model.parameters().contains(name)) {
      problems.push_back(name + " (missing in the line model)");
    }
  }
  if (!problems.empty()) {
    std::string msg = "transfer_weights: incompatible parameters:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw std::invalid_argument(msg);
  }
  for (const auto& [from, to] : mapping) {
    Var target = van.parameters().get(to);
    target.mutable_value() = line_model.parameters().get(from).value();
  }
}

}  // namespace van
