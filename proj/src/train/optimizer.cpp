#include "drcn/train/optimizer.hpp"

#include <cmath>

#include "drcn/core/errors.hpp"

namespace drcn::train {

void rmsprop_update(Tensor& theta, const Tensor& grad, Tensor& acc, const RmsPropSettings& s) {
  if (!theta.same_shape(grad) || !theta.same_shape(acc)) {
    throw DimensionError("rmsprop: parameter " + shape_to_string(theta.shape()) + ", gradient " +
                         shape_to_string(grad.shape()) + ", accumulator " + shape_to_string(acc.shape()));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + s.l2 * theta[i];
    acc[i] = s.rho * acc[i] + (1.0 - s.rho) * g * g;
    theta[i] -= s.lr * g / (std::sqrt(acc[i]) + s.epsilon);
  }
}

OptimizerState make_optimizer_state(const model::ParameterStore& params) {
  OptimizerState state;
  for (const auto& p : params.all()) {
    state.accumulators.push_back(p.trainable ? Tensor(p.var.shape()) : Tensor());
  }
  return state;
}

void check_gradients(const model::ParameterStore& params) {
  for (const auto& p : params.all()) {
    if (!p.trainable || !p.var.has_grad()) continue;
    Var v = p.var;
    if (!v.grad().all_finite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
}

double clip_gradients(model::ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.all()) {
    if (!p.trainable || !p.var.has_grad()) continue;
    Var v = p.var;
    for (double g : v.grad().values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params.all()) {
      if (!p.trainable || !p.var.has_grad()) continue;
      Var v = p.var;
      v.grad().scale_in_place(factor);
    }
  }
  return norm;
}

void rmsprop_step(model::ParameterStore& params, OptimizerState& state, const RmsPropSettings& s) {
  const auto& all = params.all();
  if (state.accumulators.size() != all.size()) {
    throw DimensionError("rmsprop: optimizer state does not match the parameter store");
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = all[i];
    if (!p.trainable) continue;
    Var v = p.var;
    RmsPropSettings ps = s;
    if (p.embedding) ps.l2 = 0.0;
    rmsprop_update(v.mutable_value(), v.grad(), state.accumulators[i], ps);
  }
  ++state.steps;
}

}  // namespace drcn::train
