#include "van/nn/var.hpp"

#include <stdexcept>
#include <unordered_set>

namespace van::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor& detail::Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Var& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  detail::Node& node = out.node();
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (Var& p : parents) node.parents.push_back(p.node_ptr());
  node.backward = std::move(backward);
  return out;
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw std::invalid_argument("backward() needs a single-element root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order without deep recursion.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(&root.node(), 0);
  visited.insert(&root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !parent->parents.empty() && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->grad.empty() && node->backward) node->backward(*node);
  }
  // Release interior nodes front to back so destruction never recurses deeply.
  for (detail::Node* node : order) {
    node->backward = nullptr;
    node->parents.clear();
    node->grad = Tensor();
  }
}

}  // namespace van::nn
