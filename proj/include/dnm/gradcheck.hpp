#ifndef DNM_GRADCHECK_HPP
#define DNM_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "dnm/autodiff.hpp"

namespace dnm {

/// Scalar-valued function of one or more tensors, expressed on a tape.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

namespace detail {

inline double evaluate_scalar(const ScalarFn& f, const std::vector<Tensor>& points) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const auto& p : points) vars.push_back(tape.constant(p));
  const Var out = f(tape, vars);
  if (out.value().size() != 1) throw ShapeError("grad_check: function output is not a scalar");
  return out.value()[0];
}

}  // namespace detail

/// Compares reverse-mode gradients against central differences at `points`.
/// Per coordinate the error is |analytic - numeric| / max(1e-8, |analytic| + |numeric|);
/// the maximum over all coordinates of all inputs is returned.
inline GradCheckResult grad_check_detailed(const ScalarFn& f, const std::vector<Tensor>& points, double eps) {
  if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : points) vars.push_back(tape.leaf(p, true));
    const Var out = f(tape, vars);
    if (out.value().size() != 1) throw ShapeError("grad_check: function output is not a scalar");
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckResult result;
  std::vector<Tensor> probe = points;
  for (std::size_t k = 0; k < points.size(); ++k) {
    for (std::size_t i = 0; i < points[k].size(); ++i) {
      const double x = points[k][i];
      probe[k][i] = x + eps;
      const double fp = detail::evaluate_scalar(f, probe);
      probe[k][i] = x - eps;
      const double fm = detail::evaluate_scalar(f, probe);
      probe[k][i] = x;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_relative_error || (k == 0 && i == 0)) {
        result = {err, k, i, a, numeric};
      }
    }
  }
  return result;
}

inline double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point, double eps) {
  return grad_check_detailed([&f](Tape& t, const std::vector<Var>& v) { return f(t, v[0]); }, {point}, eps)
      .max_relative_error;
}

}  // namespace dnm

#endif  // DNM_GRADCHECK_HPP
