#pragma once

#include <functional>
#include <vector>

#include "drcn/core/grad_check.hpp"
#include "drcn/core/ops.hpp"
#include "drcn/core/rng.hpp"

namespace drcn::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -scale, scale);
  return t;
}

inline Var random_param(Shape shape, Rng& rng, double scale = 1.0) {
  return Var::leaf(random_tensor(std::move(shape), rng, scale), true);
}

// Weighted sum with fixed random weights so every output coordinate gets a
// distinct upstream gradient.
inline Var probe_loss(Tape& tape, const Var& out, const Tensor& weights) {
  return ops::sum(tape, ops::mul(tape, out, Var::constant(weights.reshaped(out.shape()))));
}

inline double check_op(const std::function<Var(Tape&)>& op, const std::vector<Var>& params,
                       std::uint64_t seed = 7) {
  Tensor weights;
  {
    Tape tape(false);
    Var out = op(tape);
    Rng rng(seed);
    weights = random_tensor(out.shape(), rng);
  }
  return grad_check([&](Tape& tape) { return probe_loss(tape, op(tape), weights); }, params)
      .max_relative_error;
}

}  // namespace drcn::test
