#pragma once

#include <cstddef>
#include <vector>

#include "van/nn/tensor.hpp"
#include "van/nn/var.hpp"

namespace van::nn {

// Elementwise. Binary ops require identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
/// ln(max(x, floor)); the gradient is zero where the floor is active.
Var log_clamped(const Var& x, double floor);
/// Gradient passes only where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);
/// x * mask with a constant mask (dropout).
Var mask_multiply(const Var& x, const Tensor& mask);

/// Adds a vector along the last axis of x.
Var add_broadcast(const Var& x, const Var& row);

// Shape plumbing.
Var reshape(const Var& x, Shape shape);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);
Var concat(const std::vector<Var>& parts, std::size_t axis);

/// Sum of all entries, shape (1).
Var sum(const Var& x);

/// 2-D product (m x k) * (k x n).
Var matmul(const Var& a, const Var& b);

/// Affine map along the last axis: x[..., in] * weights[in, out] (+ bias[out]).
/// Pass a default-constructed Var for no bias.
Var dense(const Var& x, const Var& weights, const Var& bias = Var());

/// Along the last axis, with max subtraction.
Var softmax(const Var& logits);
Var log_softmax(const Var& logits);

/// Partitions `axis` (length n) into `target` bins [floor(i*n/m), floor((i+1)*n/m))
/// and keeps the max of each bin.
Var adaptive_max_pool(const Var& x, std::size_t target, std::size_t axis);

/// Contracts `axis` of x against a weight vector of the same length.
Var weighted_sum(const Var& x, const Var& weights, std::size_t axis);

enum class Padding { Same, Valid };

struct Stride {
  std::size_t h = 1;
  std::size_t w = 1;
};

/// Output length along one axis.
std::size_t conv_output_length(std::size_t input, std::size_t kernel, std::size_t stride, Padding padding);

/// input (H, W, Cin), weights (kh, kw, Cin, Cout), bias (Cout) or undefined.
/// Same padding puts the odd extra pixel at the bottom/right.
Var conv2d(const Var& input, const Var& weights, const Var& bias, Stride stride, Padding padding);

/// input (H, W, C), weights (kh, kw, C); each channel convolved independently.
Var depthwise_conv2d(const Var& input, const Var& weights, Stride stride, Padding padding);

/// Depthwise kernel followed by a 1x1 pointwise convolution (1, 1, C, Cout) with bias.
Var depthwise_separable_conv2d(const Var& input, const Var& depthwise, const Var& pointwise, const Var& bias,
                               Stride stride, Padding padding);

/// Per-channel normalization over all positions (every axis but the last),
/// followed by gamma * x + beta.
Var instance_norm2d(const Var& input, const Var& gamma, const Var& beta, double eps = 1e-5);

struct LstmParams {
  Var w_input;   // (Cin, 4*Ch), gate order: input, forget, candidate, output
  Var w_hidden;  // (Ch, 4*Ch)
  Var bias;      // (4*Ch)
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(const Var& x, const LstmState& prev, const LstmParams& params);

/// Runs the cell over the rows of inputs (T, Cin); returns outputs (T, Ch) and the final state.
std::pair<Var, LstmState> lstm_sequence(const Var& inputs, const LstmState& initial, const LstmParams& params);

}  // namespace van::nn
