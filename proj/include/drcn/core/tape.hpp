#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "drcn/core/tensor.hpp"

namespace drcn {

// Storage behind a Var: the forward value and, when the node participates in
// differentiation, a gradient buffer of the same shape.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;

  // Gradient buffer, allocated as zeros on first use.
  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
  void zero_grad();
};

// Shared handle to a node. Parameters are long-lived leaf Vars; everything
// produced by an op is owned by the tape that recorded it (and by any Var
// handles still pointing at it).
class Var {
 public:
  Var() = default;
  static Var leaf(Tensor value, bool requires_grad);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Gradient accumulated by the last backward pass (zeros if untouched).
  Tensor& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad() { node_->zero_grad(); }

  Node* node() const { return node_.get(); }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend class Tape;
};

// Records differentiable operations in execution order and replays their
// backward functions in exact reverse order. Fan-out is handled by summing
// into each input's gradient buffer.
class Tape {
 public:
  using Backward = std::function<void(const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  // True when an op over `inputs` must be recorded.
  bool needs_grad(std::initializer_list<const Var*> inputs) const;

  // Wraps `value` in a new Var. When any input requires a gradient (and the
  // tape is enabled) the backward function is recorded.
  Var record(Tensor value, std::initializer_list<const Var*> inputs, Backward backward);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

  // Seeds d(root)/d(root) = 1 and runs every recorded backward function.
  void backward(const Var& root);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::shared_ptr<Node> output;
    Backward backward;
  };

  Var push(Tensor value, bool differentiable, Backward backward);

  bool grad_enabled_;
  std::vector<Entry> entries_;
};

}  // namespace drcn
