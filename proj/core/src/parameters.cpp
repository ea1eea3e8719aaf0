#include "van/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace van {

nn::Var ParameterStore::add(const std::string& name, nn::Tensor init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  nn::Var v(std::move(init), true);
  items_.emplace_back(name, v);
  return v;
}

nn::Var ParameterStore::get(const std::string& name) const {
  for (const auto& [n, v] : items_)
    if (n == name) return v;
  throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const NamedParameter& p) { return p.first == name; });
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& p : items_) out.push_back(p.first);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.second.size();
  return n;
}

void ParameterStore::zero_grad() const {
  for (const auto& p : items_) p.second.zero_grad();
}

nn::Tensor fan_in_uniform(nn::Shape shape, std::size_t fan_in, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  nn::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace van
