#pragma once

#include <functional>
#include <string>
#include <vector>

#include "drcn/core/tape.hpp"

namespace drcn {

inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;  // index into the checked parameter list
  std::size_t worst_index = 0;  // flat coordinate within that parameter
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares tape gradients of a scalar loss against central differences
// (f(x+s) - f(x-s)) / 2s with s = h * max(1, |x|), coordinate by coordinate.
// Relative error uses the denominator max(|analytic|, |numeric|, floor). The
// floor sits just above the roundoff noise of a central difference on an O(1)
// loss, so exactly-zero and near-zero gradients are not reported as failures.
// `loss_fn` must be deterministic: it is re-evaluated twice per coordinate.
GradCheckResult grad_check(const std::function<Var(Tape&)>& loss_fn, const std::vector<Var>& params,
                           double h = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace drcn
