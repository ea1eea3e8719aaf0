#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "van/nn/tensor.hpp"
#include "van/nn/var.hpp"

namespace van::nn {

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar function of one tensor. Throws on non-finite values.
double grad_check(const std::function<Var(const Var&)>& fn, const Tensor& point, double eps = 1e-6);

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Checks the gradients that `loss` leaves on each listed parameter. At most
/// `max_coords` evenly spaced coordinates are probed per parameter.
std::vector<ParameterCheck> grad_check_parameters(const std::function<Var()>& loss,
                                                  const std::vector<std::pair<std::string, Var>>& parameters,
                                                  double eps = 1e-6, std::size_t max_coords = 0);

}  // namespace van::nn
