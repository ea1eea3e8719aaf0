#include "van/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace van {

using nn::Padding;
using nn::Stride;
using nn::Tensor;
using nn::Var;

EncoderConfig EncoderConfig::paper() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::desk() {
  EncoderConfig c;
  c.cb_channels = {8, 16, 32, 64, 128, 128};
  c.dscb_channels = 128;
  c.c_f = 128;
  return c;
}

void EncoderConfig::validate() const {
  if (input_channels != 1 && input_channels != 3) throw std::invalid_argument("input_channels must be 1 or 3");
  for (std::size_t c : cb_channels)
    if (c == 0) throw std::invalid_argument("cb_channels must be positive");
  if (n_dscb > 0 && dscb_channels != c_f) {
    throw std::invalid_argument("dscb_channels must equal c_f (residual connections keep the shape)");
  }
  if (n_dscb > 0 && cb_channels[5] != dscb_channels) {
    throw std::invalid_argument("cb_channels[5] must equal dscb_channels");
  }
  if (n_dscb == 0 && cb_channels[5] != c_f) throw std::invalid_argument("cb_channels[5] must equal c_f");
  dropout.validate();
}

Stride conv_block_stride(std::size_t block_index) {
  if (block_index < 1 || block_index > 6) throw std::out_of_range("conv block index must be in 1..6");
  if (block_index == 1) return {1, 1};
  if (block_index <= 4) return {2, 2};
  return {2, 1};
}

std::pair<std::size_t, std::size_t> receptive_field(const EncoderConfig& config) {
  config.validate();
  std::size_t rf_h = 1, rf_w = 1, jump_h = 1, jump_w = 1;
  auto layer = [&](std::size_t k, Stride s) {
    rf_h += (k - 1) * jump_h;
    rf_w += (k - 1) * jump_w;
    jump_h *= s.h;
    jump_w *= s.w;
  };
  for (std::size_t b = 1; b <= 6; ++b) {
    layer(3, {1, 1});
    layer(3, {1, 1});
    layer(3, conv_block_stride(b));
  }
  // Pointwise 1x1 halves of separable convolutions leave the field unchanged.
  for (std::size_t b = 0; b < config.n_dscb; ++b)
    for (int i = 0; i < 3; ++i) layer(3, {1, 1});
  return {rf_h, rf_w};
}

Encoder::Encoder(const EncoderConfig& config, ParameterStore& store, Rng& init_rng, const std::string& prefix)
    : config_(config) {
  config_.validate();
  const double relu_gain = std::sqrt(2.0);
  std::size_t in = config_.input_channels;
  for (std::size_t b = 0; b < 6; ++b) {
    const std::size_t out = config_.cb_channels[b];
    const std::string name = prefix + "cb" + std::to_string(b + 1) + ".";
    ConvBlock block;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t cin = i == 0 ? in : out;
      const std::string conv = name + "conv" + std::to_string(i + 1) + ".";
      block.convs[i].weight = store.add(conv + "weight", fan_in_uniform({3, 3, cin, out}, 9 * cin, init_rng, relu_gain));
      block.convs[i].bias = store.add(conv + "bias", Tensor({out}, 0.0));
    }
    block.norm_gamma = store.add(name + "norm.gamma", Tensor({out}, 1.0));
    block.norm_beta = store.add(name + "norm.beta", Tensor({out}, 0.0));
    conv_blocks_.push_back(std::move(block));
    in = out;
  }
  const std::size_t c = config_.dscb_channels;
  for (std::size_t b = 0; b < config_.n_dscb; ++b) {
    const std::string name = prefix + "dscb" + std::to_string(b + 1) + ".";
    SeparableBlock block;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string conv = name + "conv" + std::to_string(i + 1) + ".";
      block.convs[i].depthwise = store.add(conv + "depthwise", fan_in_uniform({3, 3, c}, 9, init_rng));
      block.convs[i].pointwise = store.add(conv + "pointwise", fan_in_uniform({1, 1, c, c}, c, init_rng, relu_gain));
      block.convs[i].bias = store.add(conv + "bias", Tensor({c}, 0.0));
    }
    block.norm_gamma = store.add(name + "norm.gamma", Tensor({c}, 1.0));
    block.norm_beta = store.add(name + "norm.beta", Tensor({c}, 0.0));
    separable_blocks_.push_back(std::move(block));
  }
}

namespace {

struct DropoutSite {
  std::size_t location = 0;
  bool active = false;
};

DropoutSite choose_site(const DropoutConfig& config, Mode mode, Rng* rng) {
  if (mode != Mode::Train) return {};
  if (!rng) throw std::invalid_argument("training mode needs an rng for dropout");
  return {pick_dropout_location(config, *rng), true};
}

Var maybe_drop(const Var& x, std::size_t location, const DropoutSite& site, const DropoutConfig& config, Rng* rng) {
  if (!site.active || site.location != location) return x;
  return mix_dropout(x, config, *rng, true);
}

}  // namespace

Var Encoder::conv_block(const Var& input, std::size_t block_index, Mode mode, Rng* rng) const {
  if (block_index < 1 || block_index > 6) throw std::out_of_range("conv block index must be in 1..6");
  const ConvBlock& block = conv_blocks_[block_index - 1];
  const std::size_t expected = block.convs[0].weight.shape()[2];
  if (input.value().rank() != 3 || input.shape()[2] != expected) {
    throw std::invalid_argument("CB_" + std::to_string(block_index) + ": input has " +
                                nn::shape_string(input.shape()) + ", expected " + std::to_string(expected) +
                                " channels");
  }
  const DropoutSite site = choose_site(config_.dropout, mode, rng);
  Var x = nn::relu(nn::conv2d(input, block.convs[0].weight, block.convs[0].bias, {1, 1}, Padding::Same));
  x = maybe_drop(x, 0, site, config_.dropout, rng);
  x = nn::relu(nn::conv2d(x, block.convs[1].weight, block.convs[1].bias, {1, 1}, Padding::Same));
  x = maybe_drop(x, 1, site, config_.dropout, rng);
  x = nn::instance_norm2d(x, block.norm_gamma, block.norm_beta);
  x = nn::relu(
      nn::conv2d(x, block.convs[2].weight, block.convs[2].bias, conv_block_stride(block_index), Padding::Same));
  return maybe_drop(x, 2, site, config_.dropout, rng);
}

Var Encoder::dsc_block(const Var& input, std::size_t block_index, Mode mode, Rng* rng) const {
  if (block_index < 1 || block_index > separable_blocks_.size()) throw std::out_of_range("DSCB index out of range");
  const SeparableBlock& block = separable_blocks_[block_index - 1];
  if (input.value().rank() != 3 || input.shape()[2] != config_.dscb_channels) {
    throw std::invalid_argument("DSCB_" + std::to_string(block_index) + ": input has " +
                                nn::shape_string(input.shape()) + ", expected " +
                                std::to_string(config_.dscb_channels) + " channels");
  }
  const DropoutSite site = choose_site(config_.dropout, mode, rng);
  auto sep = [&](const Var& x, std::size_t i) {
    const SeparableConv& c = block.convs[i];
    return nn::relu(nn::depthwise_separable_conv2d(x, c.depthwise, c.pointwise, c.bias, {1, 1}, Padding::Same));
  };
  Var x = maybe_drop(sep(input, 0), 0, site, config_.dropout, rng);
  x = maybe_drop(sep(x, 1), 1, site, config_.dropout, rng);
  x = nn::instance_norm2d(x, block.norm_gamma, block.norm_beta);
  x = maybe_drop(sep(x, 2), 2, site, config_.dropout, rng);
  return nn::add(x, input);
}

Var Encoder::encode(const Var& image, Mode mode, Rng* rng) const {
  const nn::Shape& s = image.shape();
  if (s.size() != 3 || s[2] != config_.input_channels) {
    throw std::invalid_argument("encode: image must be (H, W, " + std::to_string(config_.input_channels) +
                                "), got " + nn::shape_string(s));
  }
  if (s[0] % 32 != 0 || s[1] % 8 != 0) {
    throw std::invalid_argument("encode: image " + nn::shape_string(s) +
                                " must have height divisible by 32 and width divisible by 8; run preprocess first");
  }
  Var x = image;
  for (std::size_t b = 1; b <= 6; ++b) {
    Var y = conv_block(x, b, mode, rng);
    x = y.shape() == x.shape() ? nn::add(y, x) : y;
  }
  for (std::size_t b = 1; b <= config_.n_dscb; ++b) x = dsc_block(x, b, mode, rng);
  return x;
}

}  // namespace van
