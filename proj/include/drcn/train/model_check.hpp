#pragma once

#include <cstdint>
#include <string>

#include "drcn/core/grad_check.hpp"
#include "drcn/model/config.hpp"

namespace drcn::train {

struct ModelGradCheck {
  GradCheckResult result;
  std::string worst_name;  // parameter holding the worst coordinate
  double seconds = 0.0;
};

// Whole-model gradient check: a 3-pair batch over an 8-word vocabulary
// (10 entries with PAD/UNK), training-mode forward with a fixed dropout
// stream, loss = xent + recon_weight * recon.
ModelGradCheck model_grad_check(const model::ModelConfig& config, std::uint64_t seed, double h = 1e-5);

}  // namespace drcn::train
