#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "van/attention.hpp"
#include "van/data.hpp"
#include "van/decoder.hpp"
#include "van/encoder.hpp"

namespace van {

struct ModelConfig {
  std::string preset = "desk";
  EncoderConfig encoder = EncoderConfig::desk();
  AttentionConfig attention = AttentionConfig::desk();

  static ModelConfig paper();
  static ModelConfig desk();
  static ModelConfig from_preset(const std::string& name);
  void validate() const;

  /// Minimum input size implied by the pooling targets, padding to multiples of (32, 8).
  PreprocessConfig preprocess(bool downscale = false) const;
};

/// Encoder, attention and decoder sharing one parameter store.
class VanModel {
 public:
  VanModel(const ModelConfig& config, const Alphabet& alphabet, std::uint64_t init_seed);
  VanModel(const VanModel&) = delete;
  VanModel& operator=(const VanModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const Alphabet& alphabet() const { return alphabet_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const Encoder& encoder() const { return *encoder_; }
  const Attention& attention() const { return *attention_; }
  const Decoder& decoder() const { return *decoder_; }

 private:
  ModelConfig config_;
  Alphabet alphabet_;
  ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Attention> attention_;
  std::unique_ptr<Decoder> decoder_;
};

/// Line-level recognizer used for pretraining: the same encoder, a max pool
/// collapsing the height, and a per-frame projection to N+1 classes.
class LineModel {
 public:
  LineModel(const ModelConfig& config, const Alphabet& alphabet, std::uint64_t init_seed);
  LineModel(const LineModel&) = delete;
  LineModel& operator=(const LineModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const Alphabet& alphabet() const { return alphabet_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const Encoder& encoder() const { return *encoder_; }

  /// Per-frame log-probabilities (W/8, N+1).
  nn::Var forward(const nn::Var& image, Mode mode, Rng* rng) const;

 private:
  ModelConfig config_;
  Alphabet alphabet_;
  ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  nn::Var output_weight_;
  nn::Var output_bias_;
};

/// Copies encoder.* and the line model's output projection into the VAN
/// (as decoder.output.*). Attention and LSTM parameters are left untouched.
/// Throws std::invalid_argument listing every missing or mismatched name.
void transfer_weights(const LineModel& line_model, VanModel& van);

}  // namespace van
