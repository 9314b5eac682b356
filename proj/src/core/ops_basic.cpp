#include <algorithm>
#include <cmath>
#include <limits>

#include "drcn/core/errors.hpp"
#include "drcn/core/ops.hpp"
#include "eigen_views.hpp"

namespace drcn::ops {

namespace {

Tensor& grad_of(const Var& v) { return v.node()->grad_buffer(); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_rank2(const char* op, const Var& a) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_to_string(a.shape()));
  }
}

template <typename Fn, typename Deriv>
Var unary(Tape& tape, const Var& a, Fn fn, Deriv deriv) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  Tensor saved = tape.needs_grad({&a}) ? out : Tensor();
  return tape.record(std::move(out), {&a}, [a, saved = std::move(saved), deriv](const Tensor& g) {
    Tensor& ga = grad_of(a);
    const auto& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], saved[i]);
  });
}

}  // namespace

Var add(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out.add_in_place(b.value());
  return tape.record(std::move(out), {&a, &b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) grad_of(a).add_in_place(g);
    if (b.requires_grad()) grad_of(b).add_in_place(g);
  });
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return tape.record(std::move(out), {&a, &b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) grad_of(a).add_in_place(g);
    if (b.requires_grad()) {
      Tensor& gb = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return tape.record(std::move(out), {&a, &b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = grad_of(a);
      const auto& y = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = grad_of(b);
      const auto& x = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var scale(Tape& tape, const Var& a, double factor) {
  Tensor out = a.value();
  out.scale_in_place(factor);
  return tape.record(std::move(out), {&a}, [a, factor](const Tensor& g) {
    Tensor& ga = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_n(Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) throw ArgumentError("add_n: no terms");
  Tensor out = terms.front().value();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (terms[k].shape() != out.shape()) throw DimensionError("add_n: shape mismatch");
    out.add_in_place(terms[k].value());
  }
  return tape.record(std::move(out), terms, [terms](const Tensor& g) {
    for (const auto& t : terms) {
      if (t.requires_grad()) grad_of(t).add_in_place(g);
    }
  });
}

Var add_bias(Tape& tape, const Var& x, const Var& bias) {
  require_rank2("add_bias", x);
  const std::size_t rows = x.value().rows();
  const std::size_t cols = x.value().cols();
  if (bias.value().size() != cols) {
    throw DimensionError("add_bias: bias of " + std::to_string(bias.value().size()) +
                         " entries for " + std::to_string(cols) + " columns");
  }
  Tensor out = x.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += bv[c];
  }
  return tape.record(std::move(out), {&x, &bias}, [x, bias, rows, cols](const Tensor& g) {
    if (x.requires_grad()) grad_of(x).add_in_place(g);
    if (bias.requires_grad()) {
      Tensor& gb = grad_of(bias);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    }
  });
}

Var abs(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double v) { return std::fabs(v); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var tanh(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Tape& tape, const Var& a) {
  return unary(
      tape, a, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var matmul(Tape& tape, const Var& a, const Var& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()));
  }
  Tensor out(Shape{av.rows(), bv.cols()});
  detail::view(out).noalias() = detail::view(av) * detail::view(bv);
  return tape.record(std::move(out), {&a, &b}, [a, b](const Tensor& g) {
    const auto gv = detail::view(g);
    if (a.requires_grad()) {
      detail::view(grad_of(a)).noalias() += gv * detail::view(b.value()).transpose();
    }
    if (b.requires_grad()) {
      detail::view(grad_of(b)).noalias() += detail::view(a.value()).transpose() * gv;
    }
  });
}

Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  return add_bias(tape, matmul(tape, x, weight), bias);
}

namespace {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var concat(Tape& tape, const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat: empty input list");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: incompatible shapes " + shape_to_string(first) + " and " +
                             shape_to_string(s));
      }
    }
    out_shape[axis] += s[axis];
  }
  if (parts.size() == 1) return parts.front();

  const AxisSplit split = split_at(out_shape, axis);
  const std::size_t out_chunk = out_shape[axis] * split.inner;
  Tensor out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.shape()[axis] * split.inner;
    const double* src = p.value().data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.data() + o * out_chunk + offset);
    }
    offset += chunk;
  }
  return tape.record(std::move(out), parts, [parts, offsets, split, out_chunk, axis](const Tensor& g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Var& p = parts[k];
      if (!p.requires_grad()) continue;
      const std::size_t chunk = p.shape()[axis] * split.inner;
      Tensor& gp = grad_of(p);
      for (std::size_t o = 0; o < split.outer; ++o) {
        const double* src = g.data() + o * out_chunk + offsets[k];
        double* dst = gp.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
}

Var slice(Tape& tape, const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& in_shape = x.shape();
  if (axis >= in_shape.size() || begin > end || end > in_shape[axis]) {
    throw DimensionError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") on axis " + std::to_string(axis) + " of " + shape_to_string(in_shape));
  }
  const AxisSplit split = split_at(in_shape, axis);
  Shape out_shape = in_shape;
  out_shape[axis] = end - begin;
  const std::size_t in_chunk = in_shape[axis] * split.inner;
  const std::size_t out_chunk = (end - begin) * split.inner;
  const std::size_t offset = begin * split.inner;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(x.value().data() + o * in_chunk + offset, out_chunk, out.data() + o * out_chunk);
  }
  return tape.record(std::move(out), {&x}, [x, split, in_chunk, out_chunk, offset](const Tensor& g) {
    Tensor& gx = grad_of(x);
    for (std::size_t o = 0; o < split.outer; ++o) {
      const double* src = g.data() + o * out_chunk;
      double* dst = gx.data() + o * in_chunk + offset;
      for (std::size_t i = 0; i < out_chunk; ++i) dst[i] += src[i];
    }
  });
}

Var sum(Tape& tape, const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.record(Tensor::scalar(total), {&a}, [a](const Tensor& g) {
    Tensor& ga = grad_of(a);
    const double s = g.item();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s;
  });
}

Var mean(Tape& tape, const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ArgumentError("mean of an empty tensor");
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.record(Tensor::scalar(total / static_cast<double>(n)), {&a}, [a, n](const Tensor& g) {
    Tensor& ga = grad_of(a);
    const double s = g.item() / static_cast<double>(n);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s;
  });
}

Var softmax_masked(Tape& tape, const Var& scores, const Tensor& mask) {
  const auto& s = scores.value();
  if (s.rank() == 0 || s.rank() > 2) throw DimensionError("softmax_masked: expected rank 1 or 2");
  if (mask.size() != s.size()) {
    throw DimensionError("softmax_masked: mask " + shape_to_string(mask.shape()) + " vs scores " +
                         shape_to_string(s.shape()));
  }
  const std::size_t rows = s.rows();
  const std::size_t cols = s.cols();
  Tensor out(s.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = s.data() + r * cols;
    const double* m = mask.data() + r * cols;
    double* y = out.data() + r * cols;
    double top = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c] != 0.0) {
        top = std::max(top, in[c]);
        any = true;
      }
    }
    if (!any) throw DegenerateMaskError("softmax_masked: row " + std::to_string(r) + " is fully masked");
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c] != 0.0) {
        y[c] = std::exp(in[c] - top);
        total += y[c];
      }
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  Tensor saved = tape.needs_grad({&scores}) ? out : Tensor();
  return tape.record(std::move(out), {&scores}, [scores, saved = std::move(saved), rows, cols](const Tensor& g) {
    Tensor& gs = grad_of(scores);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = saved.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * gr[c];
      double* dst = gs.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += y[c] * (gr[c] - dot);
    }
  });
}

Var softmax_rows(Tape& tape, const Var& logits) {
  return softmax_masked(tape, logits, Tensor(logits.shape(), 1.0));
}

Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const int> labels) {
  require_rank2("softmax_cross_entropy", logits);
  const auto& z = logits.value();
  const std::size_t rows = z.rows();
  const std::size_t classes = z.cols();
  if (labels.size() != rows) throw DimensionError("softmax_cross_entropy: label count mismatch");
  if (rows == 0) throw ArgumentError("softmax_cross_entropy: empty batch");
  Tensor probs(z.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(classes) + ")");
    }
    const double* in = z.data() + r * classes;
    double* p = probs.data() + r * classes;
    const double top = *std::max_element(in, in + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(in[c] - top);
      total += p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[c] /= total;
    loss += -(in[label] - top - std::log(total));
  }
  loss /= static_cast<double>(rows);
  std::vector<int> owned(labels.begin(), labels.end());
  return tape.record(Tensor::scalar(loss), {&logits},
                     [logits, probs = std::move(probs), owned = std::move(owned), rows, classes](const Tensor& g) {
                       Tensor& gz = grad_of(logits);
                       const double s = g.item() / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double onehot = static_cast<int>(c) == owned[r] ? 1.0 : 0.0;
                           gz[r * classes + c] += s * (probs[r * classes + c] - onehot);
                         }
                       }
                     });
}

Var masked_mse(Tape& tape, const Var& prediction, const Var& target, const Tensor& row_mask) {
  require_same_shape("masked_mse", prediction, target);
  require_rank2("masked_mse", prediction);
  const std::size_t rows = prediction.value().rows();
  const std::size_t cols = prediction.value().cols();
  if (row_mask.size() != rows) throw DimensionError("masked_mse: row mask length mismatch");
  std::size_t live = 0;
  for (std::size_t r = 0; r < rows; ++r) live += row_mask[r] != 0.0 ? 1 : 0;
  if (live == 0 || cols == 0) throw DegenerateMaskError("masked_mse: no unmasked rows");
  const double denom = static_cast<double>(live * cols);
  double total = 0.0;
  const auto& p = prediction.value();
  const auto& t = target.value();
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_mask[r] == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = p[r * cols + c] - t[r * cols + c];
      total += d * d;
    }
  }
  return tape.record(Tensor::scalar(total / denom), {&prediction, &target},
                     [prediction, target, row_mask, rows, cols, denom](const Tensor& g) {
                       const double s = 2.0 * g.item() / denom;
                       const auto& p = prediction.value();
                       const auto& t = target.value();
                       Tensor* gp = prediction.requires_grad() ? &grad_of(prediction) : nullptr;
                       Tensor* gt = target.requires_grad() ? &grad_of(target) : nullptr;
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (row_mask[r] == 0.0) continue;
                         for (std::size_t c = 0; c < cols; ++c) {
                           const std::size_t i = r * cols + c;
                           const double d = s * (p[i] - t[i]);
                           if (gp) (*gp)[i] += d;
                           if (gt) (*gt)[i] -= d;
                         }
                       }
                     });
}

}  // namespace drcn::ops
