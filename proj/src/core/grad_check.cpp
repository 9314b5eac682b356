#include "drcn/core/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "drcn/core/errors.hpp"

namespace drcn {

namespace {

double evaluate(const std::function<Var(Tape&)>& loss_fn) {
  Tape tape(false);
  const double value = loss_fn(tape).value().item();
  if (!std::isfinite(value)) throw NumericError("grad_check: loss evaluated to a non-finite value");
  return value;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), kGradCheckFloor});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Var(Tape&)>& loss_fn, const std::vector<Var>& params,
                           double h) {
  for (Var p : params) {
    if (!p.requires_grad()) throw ArgumentError("grad_check: parameter does not require a gradient");
    p.zero_grad();
  }
  std::vector<Tensor> analytic;
  {
    Tape tape(true);
    Var loss = loss_fn(tape);
    if (!std::isfinite(loss.value().item())) {
      throw NumericError("grad_check: loss evaluated to a non-finite value");
    }
    tape.backward(loss);
    for (Var p : params) analytic.push_back(p.grad());
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Var param = params[k];
    Tensor& theta = param.mutable_value();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double original = theta[i];
      const double step = h * std::max(1.0, std::fabs(original));
      theta[i] = original + step;
      const double plus = evaluate(loss_fn);
      theta[i] = original - step;
      const double minus = evaluate(loss_fn);
      theta[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error(analytic[k][i], numeric);
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_param = k;
        result.worst_index = i;
        result.analytic = analytic[k][i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace drcn
