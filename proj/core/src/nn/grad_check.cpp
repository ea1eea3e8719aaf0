#include "van/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace van::nn {

namespace {

double finite_value(const Var& v) {
  const double x = v.value().item();
  if (!std::isfinite(x)) throw std::runtime_error("grad_check: function value is not finite");
  return x;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const std::function<Var(const Var&)>& fn, const Tensor& point, double eps) {
  Var x(point, true);
  Var y = fn(x);
  finite_value(y);
  backward(y);
  const Tensor analytic = x.grad();

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + eps;
    const double plus = finite_value(fn(constant(probe)));
    probe[i] = original - eps;
    const double minus = finite_value(fn(constant(probe)));
    probe[i] = original;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * eps)));
  }
  return worst;
}

std::vector<ParameterCheck> grad_check_parameters(const std::function<Var()>& loss,
                                                  const std::vector<std::pair<std::string, Var>>& parameters,
                                                  double eps, std::size_t max_coords) {
  for (const auto& [name, p] : parameters) p.zero_grad();
  Var y = loss();
  finite_value(y);
  backward(y);

  std::vector<ParameterCheck> report;
  for (const auto& [name, param] : parameters) {
    Var p = param;
    const Tensor analytic = p.grad();
    const std::size_t n = p.size();
    const std::size_t probes = (max_coords == 0 || max_coords >= n) ? n : max_coords;
    ParameterCheck check{name, 0.0, probes};
    for (std::size_t j = 0; j < probes; ++j) {
      const std::size_t i = probes == n ? j : j * n / probes;
      double& slot = p.mutable_value()[i];
      const double original = slot;
      slot = original + eps;
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        plus = finite_value(loss());
        slot = original - eps;
        minus = finite_value(loss());
      }
      slot = original;
      check.max_relative_error =
          std::max(check.max_relative_error, relative_error(analytic[i], (plus - minus) / (2.0 * eps)));
    }
    report.push_back(check);
  }
  return report;
}

}  // namespace van::nn
