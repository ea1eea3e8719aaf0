#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "van/dropout.hpp"
#include "van/nn/ops.hpp"
#include "van/parameters.hpp"

namespace van {

enum class Mode { Train, Eval };

struct EncoderConfig {
  std::size_t input_channels = 1;
  std::array<std::size_t, 6> cb_channels{32, 64, 128, 256, 256, 256};
  std::size_t dscb_channels = 256;
  std::size_t n_dscb = 4;
  std::size_t c_f = 256;
  DropoutConfig dropout;

  static EncoderConfig paper();
  static EncoderConfig desk();
  void validate() const;
};

/// Strides of the third convolution in CB_1..CB_6.
nn::Stride conv_block_stride(std::size_t block_index);

/// Analytic receptive field (height, width) of one output feature.
std::pair<std::size_t, std::size_t> receptive_field(const EncoderConfig& config);

/// FCN encoder: image (H, W, C) -> features (H/32, W/8, c_f).
class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterStore& store, Rng& init_rng, const std::string& prefix = "encoder.");

  const EncoderConfig& config() const { return config_; }

  /// CB_k, k in 1..6. `rng` is only used in training mode.
  nn::Var conv_block(const nn::Var& input, std::size_t block_index, Mode mode, Rng* rng) const;
  /// DSCB_k, k in 1..n_dscb, including its residual connection.
  nn::Var dsc_block(const nn::Var& input, std::size_t block_index, Mode mode, Rng* rng) const;
  nn::Var encode(const nn::Var& image, Mode mode, Rng* rng) const;

 private:
  struct Conv {
    nn::Var weight;
    nn::Var bias;
  };
  struct SeparableConv {
    nn::Var depthwise;
    nn::Var pointwise;
    nn::Var bias;
  };
  struct ConvBlock {
    std::array<Conv, 3> convs;
    nn::Var norm_gamma, norm_beta;
  };
  struct SeparableBlock {
    std::array<SeparableConv, 3> convs;
    nn::Var norm_gamma, norm_beta;
  };

  EncoderConfig config_;
  std::vector<ConvBlock> conv_blocks_;
  std::vector<SeparableBlock> separable_blocks_;
};

}  // namespace van
