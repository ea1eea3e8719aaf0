#pragma once

// Naive reference implementations used only by tests. They share no code with
// the library paths they check.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "van/nn/tensor.hpp"

namespace van::testing {

using nn::Tensor;

inline Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

/// Direct sliding-window convolution; pad_top/pad_left as computed by the
/// same-padding rule (ceil output, odd pixel bottom/right).
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t sh, std::size_t sw,
                           bool same) {
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const std::size_t kh = w.dim(0), kw = w.dim(1), O = w.dim(3);
  std::size_t oh, ow, pt = 0, pl = 0;
  if (same) {
    oh = (H + sh - 1) / sh;
    ow = (W + sw - 1) / sw;
    const long need_h = static_cast<long>((oh - 1) * sh + kh) - static_cast<long>(H);
    const long need_w = static_cast<long>((ow - 1) * sw + kw) - static_cast<long>(W);
    pt = need_h > 0 ? static_cast<std::size_t>(need_h) / 2 : 0;
    pl = need_w > 0 ? static_cast<std::size_t>(need_w) / 2 : 0;
  } else {
    oh = (H - kh) / sh + 1;
    ow = (W - kw) / sw + 1;
  }
  Tensor y({oh, ow, O});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j)
      for (std::size_t o = 0; o < O; ++o) {
        double acc = bias ? (*bias)[o] : 0.0;
        for (std::size_t a = 0; a < kh; ++a)
          for (std::size_t b = 0; b < kw; ++b) {
            const long r = static_cast<long>(i * sh + a) - static_cast<long>(pt);
            const long c = static_cast<long>(j * sw + b) - static_cast<long>(pl);
            if (r < 0 || c < 0 || r >= static_cast<long>(H) || c >= static_cast<long>(W)) continue;
            for (std::size_t ci = 0; ci < C; ++ci)
              acc += x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ci) *
                     w[((a * kw + b) * C + ci) * O + o];
          }
        y.at(i, j, o) = acc;
      }
  return y;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
      c.at(i, j) = acc;
    }
  return c;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// One LSTM step written gate by gate with scalar loops.
inline void naive_lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& wi, const Tensor& wh,
                            const Tensor& b, Tensor& h_out, Tensor& c_out) {
  const std::size_t ch = h.size(), cin = x.size();
  h_out = Tensor({ch});
  c_out = Tensor({ch});
  for (std::size_t u = 0; u < ch; ++u) {
    double z[4];
    for (std::size_t g = 0; g < 4; ++g) {
      double acc = b[g * ch + u];
      for (std::size_t i = 0; i < cin; ++i) acc += x[i] * wi[i * 4 * ch + g * ch + u];
      for (std::size_t i = 0; i < ch; ++i) acc += h[i] * wh[i * 4 * ch + g * ch + u];
      z[g] = acc;
    }
    const double ig = sigmoid(z[0]), fg = sigmoid(z[1]), cand = std::tanh(z[2]), og = sigmoid(z[3]);
    c_out[u] = fg * c[u] + ig * cand;
    h_out[u] = og * std::tanh(c_out[u]);
  }
}

}  // namespace van::testing

namespace van::testing {

/// Label-sequence probability by enumerating frame paths in linear space.
inline double enumerate_ctc_probability(const Tensor& probs, const std::vector<std::size_t>& target) {
  const std::size_t T = probs.dim(0), K = probs.dim(1), blank = K - 1;
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  for (;;) {
    std::vector<std::size_t> merged;
    for (std::size_t t = 0; t < T; ++t)
      if (t == 0 || path[t] != path[t - 1]) merged.push_back(path[t]);
    std::vector<std::size_t> labels;
    for (std::size_t s : merged)
      if (s != blank) labels.push_back(s);
    if (labels == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < T; ++t) p *= probs.at(t, path[t]);
      total += p;
    }
    std::size_t pos = 0;
    while (pos < T && ++path[pos] == K) path[pos++] = 0;
    if (pos == T) break;
  }
  return total;
}

inline Tensor random_distribution_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (t.at(r, c) = dist(rng));
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= z;
  }
  return t;
}

inline Tensor elementwise_log(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return out;
}

}  // namespace van::testing
