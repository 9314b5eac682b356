#include "drcn/core/tape.hpp"

#include "drcn/core/errors.hpp"

namespace drcn {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (grad.empty()) {
    if (g.size() != value.size()) {
      throw DimensionError("gradient shape " + shape_to_string(g.shape()) +
                           " does not match value shape " + shape_to_string(value.shape()));
    }
    grad = g.reshaped(value.shape());
    return;
  }
  grad.add_in_place(g);
}

void Node::zero_grad() {
  if (!grad.empty()) grad.fill(0.0);
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

bool Tape::needs_grad(std::initializer_list<const Var*> inputs) const {
  if (!grad_enabled_) return false;
  for (const Var* v : inputs) {
    if (v && v->requires_grad()) return true;
  }
  return false;
}

Var Tape::push(Tensor value, bool differentiable, Backward backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = differentiable;
  if (differentiable) entries_.push_back(Entry{node, std::move(backward)});
  return Var(std::move(node));
}

Var Tape::record(Tensor value, std::initializer_list<const Var*> inputs, Backward backward) {
  return push(std::move(value), needs_grad(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward) {
  bool differentiable = false;
  if (grad_enabled_) {
    for (const auto& v : inputs) differentiable = differentiable || v.requires_grad();
  }
  return push(std::move(value), differentiable, std::move(backward));
}

void Tape::backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw DimensionError("backward() requires a scalar root");
  }
  if (!root.requires_grad()) return;
  root.node()->grad = Tensor(root.value().shape(), 1.0);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node& out = *it->output;
    if (out.grad.empty()) continue;
    it->backward(out.grad);
  }
}

}  // namespace drcn
