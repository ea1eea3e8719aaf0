#include "van/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace van {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("Adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be non-negative");
}

Adam::Adam(const ParameterStore& store, const AdamConfig& config) : store_(store), config_(config) {
  config_.validate();
  for (const auto& [name, var] : store_.items()) {
    m_.emplace_back(var.size(), 0.0);
    v_.emplace_back(var.size(), 0.0);
  }
}

double Adam::step() {
  const auto& items = store_.items();
  if (items.size() != m_.size()) throw std::logic_error("Adam: parameter store changed after construction");
  double norm_sq = 0.0;
  for (const auto& [name, var] : items) {
    if (!var.has_grad()) continue;
    for (double g : var.node().grad.data()) norm_sq += g * g;
  }
  const double norm = std::sqrt(norm_sq);
  const double clip = config_.grad_clip > 0.0 && norm > config_.grad_clip ? config_.grad_clip / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < items.size(); ++p) {
    nn::Var var = items[p].second;
    if (!var.has_grad()) continue;
    const nn::Tensor& grad = var.node().grad;
    nn::Tensor& value = var.mutable_value();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * clip;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      value[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
    var.zero_grad();
  }
  return norm;
}

}  // namespace van
