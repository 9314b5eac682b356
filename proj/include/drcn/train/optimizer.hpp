#pragma once

#include <cstddef>
#include <vector>

#include "drcn/core/tensor.hpp"
#include "drcn/model/parameters.hpp"

namespace drcn::train {

struct RmsPropSettings {
  double lr = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
  double l2 = 0.0;
};

// acc <- rho*acc + (1-rho)*g^2 ; theta <- theta - lr*g/(sqrt(acc)+eps),
// where g = grad + l2*theta.
void rmsprop_update(Tensor& theta, const Tensor& grad, Tensor& acc, const RmsPropSettings& s);

// One accumulator per parameter of the store, in store order (fixed tables
// keep an empty slot).
struct OptimizerState {
  std::vector<Tensor> accumulators;
  std::size_t steps = 0;
};

OptimizerState make_optimizer_state(const model::ParameterStore& params);

// Throws NumericError naming the parameter when a gradient is not finite.
void check_gradients(const model::ParameterStore& params);

// Scales all trainable gradients so their global L2 norm is at most
// `max_norm`. Returns the norm before clipping.
double clip_gradients(model::ParameterStore& params, double max_norm);

// Applies one step to every trainable parameter using its current gradient.
// L2 is skipped for embedding tables.
void rmsprop_step(model::ParameterStore& params, OptimizerState& state, const RmsPropSettings& s);

}  // namespace drcn::train
