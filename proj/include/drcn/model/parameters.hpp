#pragma once

#include <string>
#include <vector>

#include "drcn/core/rng.hpp"
#include "drcn/core/tape.hpp"

namespace drcn::model {

struct Parameter {
  std::string name;
  Var var;
  bool embedding = false;  // excluded from L2
  bool trainable = true;   // false for the fixed embedding table
};

// Named parameters in creation order. Order is part of the checkpoint
// contract and of the optimizer state layout.
class ParameterStore {
 public:
  Var add(std::string name, Tensor value, bool embedding = false, bool trainable = true);
  // Glorot-uniform matrix (rows x cols) drawn from `rng`.
  Var add_glorot(std::string name, std::size_t rows, std::size_t cols, Rng& rng);
  Var add_constant(std::string name, Shape shape, double value);

  const Parameter& get(const std::string& name) const;
  Var var(const std::string& name) const { return get(name).var; }
  bool contains(const std::string& name) const;

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Var> trainable_vars() const;
  std::size_t scalar_count(bool include_embeddings) const;
  void zero_grads();

 private:
  std::vector<Parameter> params_;
};

}  // namespace drcn::model
