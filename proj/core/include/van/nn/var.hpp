#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "van/nn/tensor.hpp"

namespace van::nn {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized on first access.
  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in the recorded computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Only for parameter updates and checkpoint loading.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient after backward(); zeros if the node received none.
  Tensor grad() const;
  void zero_grad() const { node_->grad = Tensor(); }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode accumulation from a single-element root. The recorded graph is
/// released afterwards; parameter leaves keep their gradients.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. `backward` receives the result node (its grad is set)
/// and must accumulate into the parents that require gradients.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward);

/// Constant (no gradient) wrapper.
inline Var constant(Tensor value) { return Var(std::move(value), false); }

}  // namespace van::nn
