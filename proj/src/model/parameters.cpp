#include "drcn/model/parameters.hpp"

#include <cmath>

#include "drcn/core/errors.hpp"

namespace drcn::model {

Var ParameterStore::add(std::string name, Tensor value, bool embedding, bool trainable) {
  if (contains(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  auto v = Var::leaf(std::move(value), trainable);
  params_.push_back(Parameter{std::move(name), v, embedding, trainable});
  return v;
}

Var ParameterStore::add_glorot(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(Shape{rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -limit, limit);
  return add(std::move(name), std::move(t));
}

Var ParameterStore::add_constant(std::string name, Shape shape, double value) {
  return add(std::move(name), Tensor(std::move(shape), value));
}

const Parameter& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw LookupError("no parameter named '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::vector<Var> ParameterStore::trainable_vars() const {
  std::vector<Var> out;
  for (const auto& p : params_) {
    if (p.trainable) out.push_back(p.var);
  }
  return out;
}

std::size_t ParameterStore::scalar_count(bool include_embeddings) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (include_embeddings || !p.embedding) n += p.var.value().size();
  }
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) {
    if (p.trainable) p.var.zero_grad();
  }
}

}  // namespace drcn::model
