#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "van/nn/var.hpp"
#include "van/random.hpp"

namespace van {

using NamedParameter = std::pair<std::string, nn::Var>;

/// Ordered, uniquely named set of trainable tensors.
class ParameterStore {
 public:
  /// Registers a trainable leaf; throws on a duplicate name.
  nn::Var add(const std::string& name, nn::Tensor init);
  nn::Var get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<NamedParameter>& items() const { return items_; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;
  void zero_grad() const;

 private:
  std::vector<NamedParameter> items_;
};

/// Uniform in +-gain*sqrt(3/fan_in).
nn::Tensor fan_in_uniform(nn::Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0);

}  // namespace van
