#include "van/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "van/nn/gemm.hpp"

namespace van::nn {

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

// Splits a shape around `axis` into (outer, n, inner) extents.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class Forward, class Derivative>
Var unary(const Var& x, Forward forward, Derivative derivative) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_op(std::move(out), {x}, [derivative](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * derivative(p.value[i], self.value[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var relu(const Var& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log_clamped(const Var& x, double floor) {
  return unary(
      x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var mask_multiply(const Var& x, const Tensor& mask) {
  if (x.shape() != mask.shape()) {
    throw std::invalid_argument("mask_multiply: mask shape " + shape_string(mask.shape()) + " vs input " +
                                shape_string(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op(std::move(out), {x}, [mask](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var add_broadcast(const Var& x, const Var& row) {
  const std::size_t c = x.shape().back();
  if (row.size() != c) {
    throw std::invalid_argument("add_broadcast: last axis " + std::to_string(c) + " vs vector of " +
                                std::to_string(row.size()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += row.value()[i % c];
  return make_op(std::move(out), {x, row}, [c](detail::Node& self) {
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % c] += self.grad[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (length == 0 || start + length > s.n) {
    throw std::invalid_argument("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") out of range on axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  Tensor out(shape);
  const Tensor& in = x.value();
  const std::size_t block = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.data().begin() + (o * s.n + start) * s.inner, block, out.data().begin() + o * block);
  }
  return make_op(std::move(out), {x}, [s, start, block](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = self.grad.data().data() + o * block;
      double* dst = g.data().data() + (o * s.n + start) * s.inner;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) throw std::invalid_argument("concat: axis out of range");
  std::size_t total = 0;
  std::vector<std::size_t> lengths;
  for (const Var& p : parts) {
    Shape other = p.shape();
    if (other.size() != shape.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d != axis && other[d] != shape[d]) {
        throw std::invalid_argument("concat: axis " + std::to_string(d) + " mismatch " + shape_string(shape) +
                                    " vs " + shape_string(other));
      }
    }
    lengths.push_back(other[axis]);
    total += other[axis];
  }
  shape[axis] = total;
  const AxisSplit s = split_axis(shape, axis);
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t block = lengths[k] * s.inner;
    const Tensor& in = parts[k].value();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(in.data().begin() + o * block, block, out.data().begin() + (o * total + offset) * s.inner);
    }
    offset += lengths[k];
  }
  return make_op(std::move(out), parts, [s, lengths, total](detail::Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t block = lengths[k] * s.inner;
      if (self.parents[k]->requires_grad) {
        Tensor& g = self.parents[k]->grad_buffer();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = self.grad.data().data() + (o * total + offset) * s.inner;
          double* dst = g.data().data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += lengths[k];
    }
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return make_op(Tensor::scalar(total), {x}, [](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double d = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2) throw std::invalid_argument("matmul: expects 2-D operands");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: inner axis mismatch " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  Tensor out({m, n});
  gemm(false, false, m, n, k, 1.0, a.value().data().data(), b.value().data().data(), 0.0, out.data().data());
  return make_op(std::move(out), {a, b}, [m, n, k](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      gemm(false, true, m, k, n, 1.0, self.grad.data().data(), pb.value.data().data(), 1.0,
           pa.grad_buffer().data().data());
    }
    if (pb.requires_grad) {
      gemm(true, false, k, n, m, 1.0, pa.value.data().data(), self.grad.data().data(), 1.0,
           pb.grad_buffer().data().data());
    }
  });
}

Var dense(const Var& x, const Var& weights, const Var& bias) {
  if (weights.value().rank() != 2) throw std::invalid_argument("dense: weights must be 2-D");
  const std::size_t cin = weights.shape()[0], cout = weights.shape()[1];
  if (x.shape().back() != cin) {
    throw std::invalid_argument("dense: input last axis has " + std::to_string(x.shape().back()) +
                                " but weights expect " + std::to_string(cin));
  }
  if (bias.defined() && bias.size() != cout) {
    throw std::invalid_argument("dense: bias has " + std::to_string(bias.size()) + " values, expected " +
                                std::to_string(cout));
  }
  const std::size_t rows = x.size() / cin;
  Shape shape = x.shape();
  shape.back() = cout;
  Tensor out(shape);
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.value().data().begin(), cout, out.data().begin() + r * cout);
  }
  gemm(false, false, rows, cout, cin, 1.0, x.value().data().data(), weights.value().data().data(),
       bias.defined() ? 1.0 : 0.0, out.data().data());
  std::vector<Var> parents{x, weights};
  if (bias.defined()) parents.push_back(bias);
  return make_op(std::move(out), std::move(parents), [rows, cin, cout](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pw = *self.parents[1];
    if (px.requires_grad) {
      gemm(false, true, rows, cin, cout, 1.0, self.grad.data().data(), pw.value.data().data(), 1.0,
           px.grad_buffer().data().data());
    }
    if (pw.requires_grad) {
      gemm(true, false, cin, cout, rows, 1.0, px.value.data().data(), self.grad.data().data(), 1.0,
           pw.grad_buffer().data().data());
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& g = self.parents[2]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cout; ++c) g[c] += self.grad[r * cout + c];
    }
  });
}

Var softmax(const Var& logits) {
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.size() / n;
  const Tensor& in = logits.value();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data().data() + r * n;
    double* y = out.data().data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (y[i] = std::exp(x[i] - mx));
    for (std::size_t i = 0; i < n; ++i) y[i] /= total;
  }
  return make_op(std::move(out), {logits}, [n, rows](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data().data() + r * n;
      const double* dy = self.grad.data().data() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) g[r * n + i] += y[i] * (dy[i] - dot);
    }
  });
}

Var log_softmax(const Var& logits) {
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.size() / n;
  const Tensor& in = logits.value();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data().data() + r * n;
    double* y = out.data().data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::exp(x[i] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - lse;
  }
  return make_op(std::move(out), {logits}, [n, rows](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data().data() + r * n;
      const double* dy = self.grad.data().data() + r * n;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += dy[i];
      for (std::size_t i = 0; i < n; ++i) g[r * n + i] += dy[i] - std::exp(y[i]) * total;
    }
  });
}

Var adaptive_max_pool(const Var& x, std::size_t target, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (target == 0 || s.n < target) {
    throw std::invalid_argument("adaptive_max_pool: input shorter than pool target (" + std::to_string(s.n) + " < " +
                                std::to_string(target) + ")");
  }
  Shape shape = x.shape();
  shape[axis] = target;
  Tensor out(shape);
  std::vector<std::size_t> argmax(out.size());
  const Tensor& in = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t b = 0; b < target; ++b) {
      const std::size_t lo = b * s.n / target;
      const std::size_t hi = (b + 1) * s.n / target;
      for (std::size_t i = 0; i < s.inner; ++i) {
        std::size_t best = (o * s.n + lo) * s.inner + i;
        for (std::size_t k = lo + 1; k < hi; ++k) {
          const std::size_t idx = (o * s.n + k) * s.inner + i;
          if (in[idx] > in[best]) best = idx;
        }
        const std::size_t oi = (o * target + b) * s.inner + i;
        out[oi] = in[best];
        argmax[oi] = best;
      }
    }
  }
  return make_op(std::move(out), {x}, [argmax = std::move(argmax)](detail::Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

Var weighted_sum(const Var& x, const Var& weights, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (weights.size() != s.n) {
    throw std::invalid_argument("weighted_sum: axis " + std::to_string(axis) + " has " + std::to_string(s.n) +
                                " entries but " + std::to_string(weights.size()) + " weights");
  }
  Shape shape;
  for (std::size_t d = 0; d < x.shape().size(); ++d)
    if (d != axis) shape.push_back(x.shape()[d]);
  if (shape.empty()) shape.push_back(1);
  Tensor out(shape);
  const double* w = weights.value().data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    // (1 x n) * (n x inner)
    gemm(false, false, 1, s.inner, s.n, 1.0, w, x.value().data().data() + o * s.n * s.inner, 0.0,
         out.data().data() + o * s.inner);
  }
  return make_op(std::move(out), {x, weights}, [s](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pw = *self.parents[1];
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* dy = self.grad.data().data() + o * s.inner;
      const double* xo = px.value.data().data() + o * s.n * s.inner;
      if (px.requires_grad) {
        double* gx = px.grad_buffer().data().data() + o * s.n * s.inner;
        for (std::size_t k = 0; k < s.n; ++k) {
          const double wk = pw.value[k];
          for (std::size_t i = 0; i < s.inner; ++i) gx[k * s.inner + i] += wk * dy[i];
        }
      }
      if (pw.requires_grad) {
        Tensor& gw = pw.grad_buffer();
        for (std::size_t k = 0; k < s.n; ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < s.inner; ++i) acc += xo[k * s.inner + i] * dy[i];
          gw[k] += acc;
        }
      }
    }
  });
}

std::size_t conv_output_length(std::size_t input, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  if (padding == Padding::Same) return (input + stride - 1) / stride;
  if (input < kernel) throw std::invalid_argument("valid convolution: input shorter than kernel");
  return (input - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t in_h, in_w, channels;
  std::size_t k_h, k_w;
  std::size_t out_h, out_w;
  std::size_t stride_h, stride_w;
  std::size_t pad_top, pad_left;
};

std::size_t leading_pad(std::size_t input, std::size_t output, std::size_t kernel, std::size_t stride,
                        Padding padding) {
  if (padding == Padding::Valid) return 0;
  const std::size_t needed = (output - 1) * stride + kernel;
  return needed > input ? (needed - input) / 2 : 0;
}

ConvGeometry conv_geometry(const char* op, const Shape& input, std::size_t k_h, std::size_t k_w, Stride stride,
                           Padding padding) {
  if (input.size() != 3) {
    throw std::invalid_argument(std::string(op) + ": input must be (H, W, C), got " + shape_string(input));
  }
  if (padding == Padding::Same && (k_h % 2 == 0 || k_w % 2 == 0)) {
    throw std::invalid_argument(std::string(op) + ": same padding needs odd kernel dims, got " +
                                std::to_string(k_h) + "x" + std::to_string(k_w));
  }
  ConvGeometry g{};
  g.in_h = input[0];
  g.in_w = input[1];
  g.channels = input[2];
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride_h = stride.h;
  g.stride_w = stride.w;
  g.out_h = conv_output_length(g.in_h, k_h, stride.h, padding);
  g.out_w = conv_output_length(g.in_w, k_w, stride.w, padding);
  g.pad_top = leading_pad(g.in_h, g.out_h, k_h, stride.h, padding);
  g.pad_left = leading_pad(g.in_w, g.out_w, k_w, stride.w, padding);
  return g;
}

// Rows are output pixels, columns (ki, kj, c), matching the (kh, kw, Cin, Cout) weight layout.
template <typename T>
void im2col(const ConvGeometry& g, const double* x, T* col) {
  const std::size_t k = g.k_h * g.k_w * g.channels;
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      T* row = col + (oh * g.out_w + ow) * k;
      for (std::size_t ki = 0; ki < g.k_h; ++ki) {
        const long ih = static_cast<long>(oh * g.stride_h + ki) - static_cast<long>(g.pad_top);
        for (std::size_t kj = 0; kj < g.k_w; ++kj) {
          const long iw = static_cast<long>(ow * g.stride_w + kj) - static_cast<long>(g.pad_left);
          T* dst = row + (ki * g.k_w + kj) * g.channels;
          if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) {
            std::fill_n(dst, g.channels, T(0));
          } else {
            const double* src =
                x + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.channels;
            for (std::size_t c = 0; c < g.channels; ++c) dst[c] = static_cast<T>(src[c]);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, double* x) {
  const std::size_t k = g.k_h * g.k_w * g.channels;
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      const T* row = col + (oh * g.out_w + ow) * k;
      for (std::size_t ki = 0; ki < g.k_h; ++ki) {
        const long ih = static_cast<long>(oh * g.stride_h + ki) - static_cast<long>(g.pad_top);
        if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
        for (std::size_t kj = 0; kj < g.k_w; ++kj) {
          const long iw = static_cast<long>(ow * g.stride_w + kj) - static_cast<long>(g.pad_left);
          if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
          const T* src = row + (ki * g.k_w + kj) * g.channels;
          double* dst = x + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.channels;
          for (std::size_t c = 0; c < g.channels; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

// Scratch reused across calls; large convolutions would otherwise pay for
// fresh zeroed pages on every call.
template <typename T>
T* scratch(std::size_t slot, std::size_t n) {
  thread_local std::vector<T> buffers[3];
  if (buffers[slot].size() < n) buffers[slot].resize(n);
  return buffers[slot].data();
}

template <typename T>
const T* narrowed(std::size_t slot, const double* values, std::size_t n) {
  if constexpr (std::is_same_v<T, double>) {
    return values;
  } else {
    T* out = scratch<T>(slot, n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(values[i]);
    return out;
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, std::size_t cout, const double* x, const double* w, bool accumulate,
                  double* out) {
  const std::size_t pixels = g.out_h * g.out_w, k = g.k_h * g.k_w * g.channels;
  T* col = scratch<T>(0, pixels * k);
  im2col(g, x, col);
  const T* wt = narrowed<T>(1, w, k * cout);
  if constexpr (std::is_same_v<T, double>) {
    gemm(false, false, pixels, cout, k, 1.0, col, wt, accumulate ? 1.0 : 0.0, out);
  } else {
    T* y = scratch<T>(2, pixels * cout);
    gemm(false, false, pixels, cout, k, 1.0f, col, wt, 0.0f, y);
    for (std::size_t i = 0; i < pixels * cout; ++i) out[i] = (accumulate ? out[i] : 0.0) + y[i];
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, std::size_t cout, const double* x, const double* w, const double* dy,
                   double* dw, double* dx) {
  const std::size_t pixels = g.out_h * g.out_w, k = g.k_h * g.k_w * g.channels;
  const T* dyt = narrowed<T>(2, dy, pixels * cout);
  T* col = scratch<T>(0, pixels * k);
  if (dw) {
    im2col(g, x, col);
    if constexpr (std::is_same_v<T, double>) {
      gemm(true, false, k, cout, pixels, 1.0, col, dyt, 1.0, dw);
    } else {
      std::vector<T> partial(k * cout);
      gemm(true, false, k, cout, pixels, 1.0f, col, dyt, 0.0f, partial.data());
      for (std::size_t i = 0; i < k * cout; ++i) dw[i] += partial[i];
    }
  }
  if (dx) {
    const T* wt = narrowed<T>(1, w, k * cout);
    gemm(false, true, pixels, k, cout, T(1), dyt, wt, T(0), col);
    col2im(g, col, dx);
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& weights, const Var& bias, Stride stride, Padding padding) {
  const Shape& ws = weights.shape();
  if (ws.size() != 4) throw std::invalid_argument("conv2d: weights must be (kh, kw, Cin, Cout), got " + shape_string(ws));
  const ConvGeometry g = conv_geometry("conv2d", input.shape(), ws[0], ws[1], stride, padding);
  if (ws[2] != g.channels) {
    throw std::invalid_argument("conv2d: input channel axis (2) has " + std::to_string(g.channels) +
                                " but weights expect " + std::to_string(ws[2]));
  }
  const std::size_t cout = ws[3];
  if (bias.defined() && bias.size() != cout) {
    throw std::invalid_argument("conv2d: bias has " + std::to_string(bias.size()) + " values, output channel axis (3) has " +
                                std::to_string(cout));
  }
  const std::size_t pixels = g.out_h * g.out_w;
  Tensor out({g.out_h, g.out_w, cout});
  if (bias.defined()) {
    for (std::size_t p = 0; p < pixels; ++p) std::copy_n(bias.value().data().begin(), cout, out.data().begin() + p * cout);
  }
  const bool narrow = gemm_precision() == GemmPrecision::Float32;
  if (narrow) {
    conv_forward<float>(g, cout, input.value().data().data(), weights.value().data().data(), bias.defined(),
                        out.data().data());
  } else {
    conv_forward<double>(g, cout, input.value().data().data(), weights.value().data().data(), bias.defined(),
                         out.data().data());
  }
  std::vector<Var> parents{input, weights};
  if (bias.defined()) parents.push_back(bias);
  return make_op(std::move(out), std::move(parents), [g, pixels, cout, narrow](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pw = *self.parents[1];
    const double* dy = self.grad.data().data();
    double* dw = pw.requires_grad ? pw.grad_buffer().data().data() : nullptr;
    double* dx = px.requires_grad ? px.grad_buffer().data().data() : nullptr;
    if (narrow) {
      conv_backward<float>(g, cout, px.value.data().data(), pw.value.data().data(), dy, dw, dx);
    } else {
      conv_backward<double>(g, cout, px.value.data().data(), pw.value.data().data(), dy, dw, dx);
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& gb = self.parents[2]->grad_buffer();
      for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t c = 0; c < cout; ++c) gb[c] += dy[p * cout + c];
    }
  });
}

Var depthwise_conv2d(const Var& input, const Var& weights, Stride stride, Padding padding) {
  const Shape& ws = weights.shape();
  if (ws.size() != 3) throw std::invalid_argument("depthwise_conv2d: weights must be (kh, kw, C), got " + shape_string(ws));
  const ConvGeometry g = conv_geometry("depthwise_conv2d", input.shape(), ws[0], ws[1], stride, padding);
  if (ws[2] != g.channels) {
    throw std::invalid_argument("depthwise_conv2d: input channel axis (2) has " + std::to_string(g.channels) +
                                " but weights expect " + std::to_string(ws[2]));
  }
  const std::size_t c_n = g.channels;
  Tensor out({g.out_h, g.out_w, c_n});
  const double* x = input.value().data().data();
  const double* w = weights.value().data().data();
  auto visit = [g, c_n](auto&& fn) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ki = 0; ki < g.k_h; ++ki) {
        const long ih = static_cast<long>(oh * g.stride_h + ki) - static_cast<long>(g.pad_top);
        if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          for (std::size_t kj = 0; kj < g.k_w; ++kj) {
            const long iw = static_cast<long>(ow * g.stride_w + kj) - static_cast<long>(g.pad_left);
            if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
            fn((oh * g.out_w + ow) * c_n,
               (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * c_n, (ki * g.k_w + kj) * c_n);
          }
        }
      }
    }
  };
  double* y = out.data().data();
  visit([&](std::size_t yo, std::size_t xo, std::size_t wo) {
    for (std::size_t c = 0; c < c_n; ++c) y[yo + c] += x[xo + c] * w[wo + c];
  });
  return make_op(std::move(out), {input, weights}, [visit, c_n](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pw = *self.parents[1];
    const double* dy = self.grad.data().data();
    const double* xv = px.value.data().data();
    const double* wv = pw.value.data().data();
    double* gx = px.requires_grad ? px.grad_buffer().data().data() : nullptr;
    double* gw = pw.requires_grad ? pw.grad_buffer().data().data() : nullptr;
    visit([&](std::size_t yo, std::size_t xo, std::size_t wo) {
      for (std::size_t c = 0; c < c_n; ++c) {
        if (gx) gx[xo + c] += dy[yo + c] * wv[wo + c];
        if (gw) gw[wo + c] += dy[yo + c] * xv[xo + c];
      }
    });
  });
}

Var depthwise_separable_conv2d(const Var& input, const Var& depthwise, const Var& pointwise, const Var& bias,
                               Stride stride, Padding padding) {
  const Shape& ps = pointwise.shape();
  if (ps.size() != 4 || ps[0] != 1 || ps[1] != 1) {
    throw std::invalid_argument("depthwise_separable_conv2d: pointwise weights must be (1, 1, C, Cout), got " +
                                shape_string(ps));
  }
  Var spatial = depthwise_conv2d(input, depthwise, stride, padding);
  return dense(spatial, reshape(pointwise, {ps[2], ps[3]}), bias);
}

Var instance_norm2d(const Var& input, const Var& gamma, const Var& beta, double eps) {
  const std::size_t c_n = input.shape().back();
  if (gamma.size() != c_n || beta.size() != c_n) {
    throw std::invalid_argument("instance_norm2d: channel axis has " + std::to_string(c_n) +
                                " entries but affine parameters have " + std::to_string(gamma.size()));
  }
  const std::size_t positions = input.size() / c_n;
  const Tensor& x = input.value();
  std::vector<double> mean(c_n, 0.0), inv_std(c_n, 0.0);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t c = 0; c < c_n; ++c) mean[c] += x[p * c_n + c];
  for (double& m : mean) m /= static_cast<double>(positions);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const double d = x[p * c_n + c] - mean[c];
      inv_std[c] += d * d;
    }
  }
  for (double& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(positions) + eps);
  Tensor normalized(x.shape());
  Tensor out(x.shape());
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const std::size_t i = p * c_n + c;
      normalized[i] = (x[i] - mean[c]) * inv_std[c];
      out[i] = normalized[i] * gamma.value()[c] + beta.value()[c];
    }
  }
  return make_op(std::move(out), {input, gamma, beta},
                 [normalized = std::move(normalized), inv_std = std::move(inv_std), positions, c_n](detail::Node& self) {
                   detail::Node& px = *self.parents[0];
                   detail::Node& pg = *self.parents[1];
                   detail::Node& pb = *self.parents[2];
                   const Tensor& dy = self.grad;
                   std::vector<double> sum_dxhat(c_n, 0.0), sum_dxhat_xhat(c_n, 0.0);
                   for (std::size_t p = 0; p < positions; ++p) {
                     for (std::size_t c = 0; c < c_n; ++c) {
                       const std::size_t i = p * c_n + c;
                       const double dxhat = dy[i] * pg.value[c];
                       sum_dxhat[c] += dxhat;
                       sum_dxhat_xhat[c] += dxhat * normalized[i];
                     }
                   }
                   if (pg.requires_grad || pb.requires_grad) {
                     Tensor* gg = pg.requires_grad ? &pg.grad_buffer() : nullptr;
                     Tensor* gb = pb.requires_grad ? &pb.grad_buffer() : nullptr;
                     for (std::size_t p = 0; p < positions; ++p) {
                       for (std::size_t c = 0; c < c_n; ++c) {
                         const std::size_t i = p * c_n + c;
                         if (gg) (*gg)[c] += dy[i] * normalized[i];
                         if (gb) (*gb)[c] += dy[i];
                       }
                     }
                   }
                   if (px.requires_grad) {
                     Tensor& gx = px.grad_buffer();
                     const double n = static_cast<double>(positions);
                     for (std::size_t p = 0; p < positions; ++p) {
                       for (std::size_t c = 0; c < c_n; ++c) {
                         const std::size_t i = p * c_n + c;
                         const double dxhat = dy[i] * pg.value[c];
                         gx[i] += inv_std[c] / n * (n * dxhat - sum_dxhat[c] - normalized[i] * sum_dxhat_xhat[c]);
                       }
                     }
                   }
                 });
}

LstmState lstm_step(const Var& x, const LstmState& prev, const LstmParams& params) {
  const std::size_t ch = prev.h.size();
  if (params.w_hidden.shape() != Shape{ch, 4 * ch}) {
    throw std::invalid_argument("lstm_step: hidden weights " + shape_string(params.w_hidden.shape()) +
                                " inconsistent with hidden size " + std::to_string(ch));
  }
  Var gates = add(dense(x, params.w_input, params.bias), dense(prev.h, params.w_hidden));
  Var in_gate = sigmoid(slice(gates, 0, 0, ch));
  Var forget_gate = sigmoid(slice(gates, 0, ch, ch));
  Var candidate = tanh(slice(gates, 0, 2 * ch, ch));
  Var out_gate = sigmoid(slice(gates, 0, 3 * ch, ch));
  Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

std::pair<Var, LstmState> lstm_sequence(const Var& inputs, const LstmState& initial, const LstmParams& params) {
  if (inputs.value().rank() != 2) throw std::invalid_argument("lstm_sequence: inputs must be (T, Cin)");
  const std::size_t steps = inputs.shape()[0];
  const std::size_t ch = initial.h.size();
  // Input projections for all frames at once.
  Var projected = dense(inputs, params.w_input, params.bias);
  LstmState state = initial;
  std::vector<Var> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Var gates = add(reshape(slice(projected, 0, t, 1), {4 * ch}), dense(state.h, params.w_hidden));
    Var in_gate = sigmoid(slice(gates, 0, 0, ch));
    Var forget_gate = sigmoid(slice(gates, 0, ch, ch));
    Var candidate = tanh(slice(gates, 0, 2 * ch, ch));
    Var out_gate = sigmoid(slice(gates, 0, 3 * ch, ch));
    state.c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
    state.h = mul(out_gate, tanh(state.c));
    outputs.push_back(reshape(state.h, {1, ch}));
  }
  return {concat(outputs, 0), state};
}

}  // namespace van::nn
