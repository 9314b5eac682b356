#include <algorithm>
#include <cmath>
#include <memory>

#include "drcn/core/errors.hpp"
#include "drcn/core/ops.hpp"
#include "eigen_views.hpp"

namespace drcn::ops {

namespace {

thread_local double backward_fault = 1.0;

Tensor& grad_of(const Var& v) { return v.node()->grad_buffer(); }

void require_rank2(const char* op, const Var& a) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_to_string(a.shape()));
  }
}

// Rows and batch layout implied by a sequence mask.
struct SeqLayout {
  std::size_t batch;
  std::size_t steps;
  bool rank1;
};

SeqLayout layout_of(const Tensor& mask) {
  if (mask.rank() == 1) return {1, mask.dim(0), true};
  if (mask.rank() == 2) return {mask.dim(0), mask.dim(1), false};
  throw DimensionError("sequence mask must be rank 1 or 2, got " + shape_to_string(mask.shape()));
}

double sigmoid_of(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

namespace testing {
void set_backward_fault(double factor) { backward_fault = factor; }
}  // namespace testing

Var cosine(Tape& tape, const Var& u, const Var& v) {
  const auto& a = u.value();
  const auto& b = v.value();
  if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size() || a.size() == 0) {
    throw DimensionError("cosine: expected two equal-length vectors, got " +
                         shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    nu2 += a[i] * a[i];
    nv2 += b[i] * b[i];
  }
  const double nu = std::sqrt(nu2);
  const double nv = std::sqrt(nv2);
  const double denom = nu * nv + kCosineEpsilon;
  return tape.record(Tensor::scalar(dot / denom), {&u, &v}, [u, v, dot, nu, nv, denom](const Tensor& g) {
    const double s = g.item();
    const auto& a = u.value();
    const auto& b = v.value();
    const double d2 = denom * denom;
    if (u.requires_grad()) {
      Tensor& gu = grad_of(u);
      const double k = nu > 0.0 ? dot * nv / (nu * d2) : 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) gu[i] += s * (b[i] / denom - k * a[i]);
    }
    if (v.requires_grad()) {
      Tensor& gv = grad_of(v);
      const double k = nv > 0.0 ? dot * nu / (nv * d2) : 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) gv[i] += s * (a[i] / denom - k * b[i]);
    }
  });
}

Var cosine_scores(Tape& tape, const Var& hp, const Var& hq, std::size_t batch) {
  require_rank2("cosine_scores", hp);
  require_rank2("cosine_scores", hq);
  const auto& p = hp.value();
  const auto& q = hq.value();
  if (batch == 0 || p.rows() % batch || q.rows() % batch || p.cols() != q.cols()) {
    throw DimensionError("cosine_scores: " + shape_to_string(p.shape()) + " vs " +
                         shape_to_string(q.shape()) + " over " + std::to_string(batch) + " blocks");
  }
  const std::size_t I = p.rows() / batch;
  const std::size_t J = q.rows() / batch;
  const std::size_t d = p.cols();
  Tensor out(Shape{batch * I, J});
  Tensor dots(Shape{batch * I, J});
  std::vector<double> norm_p(batch * I), norm_q(batch * J);
  for (std::size_t r = 0; r < batch * I; ++r) norm_p[r] = detail::view(p.data() + r * d, 1, d).norm();
  for (std::size_t r = 0; r < batch * J; ++r) norm_q[r] = detail::view(q.data() + r * d, 1, d).norm();
  for (std::size_t b = 0; b < batch; ++b) {
    auto dv = detail::view(dots.data() + b * I * J, I, J);
    dv.noalias() = detail::view(p.data() + b * I * d, I, d) * detail::view(q.data() + b * J * d, J, d).transpose();
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        out[(b * I + i) * J + j] =
            dots[(b * I + i) * J + j] / (norm_p[b * I + i] * norm_q[b * J + j] + kCosineEpsilon);
      }
    }
  }
  return tape.record(std::move(out), {&hp, &hq},
                     [hp, hq, batch, I, J, d, dots = std::move(dots), norm_p = std::move(norm_p),
                      norm_q = std::move(norm_q)](const Tensor& g) {
                       const auto& p = hp.value();
                       const auto& q = hq.value();
                       Tensor* gp = hp.requires_grad() ? &grad_of(hp) : nullptr;
                       Tensor* gq = hq.requires_grad() ? &grad_of(hq) : nullptr;
                       detail::RowMatrix scaled(I, J);
                       std::vector<double> row_coef(I), col_coef(J);
                       for (std::size_t b = 0; b < batch; ++b) {
                         std::fill(row_coef.begin(), row_coef.end(), 0.0);
                         std::fill(col_coef.begin(), col_coef.end(), 0.0);
                         for (std::size_t i = 0; i < I; ++i) {
                           const double np = norm_p[b * I + i];
                           for (std::size_t j = 0; j < J; ++j) {
                             const double nq = norm_q[b * J + j];
                             const std::size_t k = (b * I + i) * J + j;
                             const double denom = np * nq + kCosineEpsilon;
                             const double gk = g[k];
                             scaled(i, j) = gk / denom;
                             const double t = gk * dots[k] / (denom * denom);
                             if (np > 0.0) row_coef[i] += t * nq / np;
                             if (nq > 0.0) col_coef[j] += t * np / nq;
                           }
                         }
                         const auto pb = detail::view(p.data() + b * I * d, I, d);
                         const auto qb = detail::view(q.data() + b * J * d, J, d);
                         if (gp) {
                           auto gpb = detail::view(gp->data() + b * I * d, I, d);
                           gpb.noalias() += scaled * qb;
                           for (std::size_t i = 0; i < I; ++i) gpb.row(i) -= row_coef[i] * pb.row(i);
                         }
                         if (gq) {
                           auto gqb = detail::view(gq->data() + b * J * d, J, d);
                           gqb.noalias() += scaled.transpose() * pb;
                           for (std::size_t j = 0; j < J; ++j) gqb.row(j) -= col_coef[j] * qb.row(j);
                         }
                       }
                     });
}

Var block_matmul(Tape& tape, const Var& a, const Var& b, std::size_t batch) {
  require_rank2("block_matmul", a);
  require_rank2("block_matmul", b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (batch == 0 || av.rows() % batch || bv.rows() % batch || av.cols() != bv.rows() / batch) {
    throw DimensionError("block_matmul: " + shape_to_string(av.shape()) + " x " +
                         shape_to_string(bv.shape()) + " over " + std::to_string(batch) + " blocks");
  }
  const std::size_t m = av.rows() / batch;
  const std::size_t k = av.cols();
  const std::size_t n = bv.cols();
  Tensor out(Shape{batch * m, n});
  for (std::size_t blk = 0; blk < batch; ++blk) {
    detail::view(out.data() + blk * m * n, m, n).noalias() =
        detail::view(av.data() + blk * m * k, m, k) * detail::view(bv.data() + blk * k * n, k, n);
  }
  return tape.record(std::move(out), {&a, &b}, [a, b, batch, m, k, n](const Tensor& g) {
    for (std::size_t blk = 0; blk < batch; ++blk) {
      const auto gb = detail::view(g.data() + blk * m * n, m, n);
      if (a.requires_grad()) {
        detail::view(grad_of(a).data() + blk * m * k, m, k).noalias() +=
            gb * detail::view(b.value().data() + blk * k * n, k, n).transpose();
      }
      if (b.requires_grad()) {
        detail::view(grad_of(b).data() + blk * k * n, k, n).noalias() +=
            detail::view(a.value().data() + blk * m * k, m, k).transpose() * gb;
      }
    }
  });
}

Var block_transpose(Tape& tape, const Var& a, std::size_t batch) {
  require_rank2("block_transpose", a);
  const auto& av = a.value();
  if (batch == 0 || av.rows() % batch) throw DimensionError("block_transpose: rows not divisible by batch");
  const std::size_t m = av.rows() / batch;
  const std::size_t n = av.cols();
  Tensor out(Shape{batch * n, m});
  for (std::size_t blk = 0; blk < batch; ++blk) {
    detail::view(out.data() + blk * n * m, n, m) = detail::view(av.data() + blk * m * n, m, n).transpose();
  }
  return tape.record(std::move(out), {&a}, [a, batch, m, n](const Tensor& g) {
    Tensor& ga = grad_of(a);
    for (std::size_t blk = 0; blk < batch; ++blk) {
      detail::view(ga.data() + blk * m * n, m, n) += detail::view(g.data() + blk * n * m, n, m).transpose();
    }
  });
}

Var max_pool_time(Tape& tape, const Var& x, const Tensor& mask, PoolRecord* record) {
  require_rank2("max_pool_time", x);
  const SeqLayout lay = layout_of(mask);
  const auto& xv = x.value();
  if (xv.rows() != lay.batch * lay.steps) {
    throw DimensionError("max_pool_time: " + shape_to_string(xv.shape()) + " rows vs mask " +
                         shape_to_string(mask.shape()));
  }
  const std::size_t d = xv.cols();
  Tensor out(lay.rank1 ? Shape{d} : Shape{lay.batch, d});
  std::vector<std::size_t> winners(lay.batch * d, 0);
  for (std::size_t b = 0; b < lay.batch; ++b) {
    std::size_t first = lay.steps;
    for (std::size_t t = 0; t < lay.steps; ++t) {
      if (mask[b * lay.steps + t] != 0.0) {
        first = t;
        break;
      }
    }
    if (first == lay.steps) {
      throw DegenerateMaskError("max_pool_time: sequence " + std::to_string(b) + " is fully masked");
    }
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t best = first;
      double top = xv[(b * lay.steps + first) * d + k];
      for (std::size_t t = first + 1; t < lay.steps; ++t) {
        if (mask[b * lay.steps + t] == 0.0) continue;
        const double v = xv[(b * lay.steps + t) * d + k];
        if (v > top) {
          top = v;
          best = t;
        }
      }
      out[b * d + k] = top;
      winners[b * d + k] = best;
    }
  }
  if (record) *record = PoolRecord{lay.batch, d, winners};
  const std::size_t steps = lay.steps;
  const std::size_t batch = lay.batch;
  return tape.record(std::move(out), {&x}, [x, winners = std::move(winners), steps, batch, d](const Tensor& g) {
    Tensor& gx = grad_of(x);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < d; ++k) {
        gx[(b * steps + winners[b * d + k]) * d + k] += g[b * d + k];
      }
    }
  });
}

Var mask_rows(Tape& tape, const Var& x, const Tensor& mask) {
  require_rank2("mask_rows", x);
  const auto& xv = x.value();
  if (xv.rows() != mask.size()) throw DimensionError("mask_rows: row count mismatch");
  const std::size_t d = xv.cols();
  Tensor out = xv;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r] == 0.0) std::fill_n(out.data() + r * d, d, 0.0);
  }
  return tape.record(std::move(out), {&x}, [x, mask, d](const Tensor& g) {
    Tensor& gx = grad_of(x);
    for (std::size_t r = 0; r < mask.size(); ++r) {
      if (mask[r] == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[r * d + c];
    }
  });
}

Var dropout(Tape& tape, const Var& x, double keep, bool training, Rng& rng) {
  if (keep <= 0.0 || keep > 1.0) throw ArgumentError("dropout: keep rate must lie in (0, 1]");
  if (!training || keep == 1.0) return x;
  Tensor factors(x.shape());
  const double inv = 1.0 / keep;
  for (std::size_t i = 0; i < factors.size(); ++i) factors[i] = uniform01(rng) < keep ? inv : 0.0;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factors[i];
  return tape.record(std::move(out), {&x}, [x, factors = std::move(factors)](const Tensor& g) {
    Tensor& gx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factors[i];
  });
}

Var batch_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training) {
  require_rank2("batch_norm", x);
  const auto& xv = x.value();
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d || stats.running_mean.size() != d ||
      stats.running_var.size() != d) {
    throw DimensionError("batch_norm: parameter width mismatch");
  }
  std::vector<double> mu(d, 0.0), inv_std(d, 0.0);
  if (training) {
    if (n == 0) throw ArgumentError("batch_norm: empty batch");
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) mu[c] += xv[r * d + c];
    }
    for (auto& m : mu) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = xv[r * d + c] - mu[c];
        var[c] += dv * dv;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      var[c] /= static_cast<double>(n);
      inv_std[c] = 1.0 / std::sqrt(var[c] + stats.epsilon);
      stats.running_mean[c] = stats.momentum * stats.running_mean[c] + (1.0 - stats.momentum) * mu[c];
      stats.running_var[c] = stats.momentum * stats.running_var[c] + (1.0 - stats.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < d; ++c) {
      mu[c] = stats.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(stats.running_var[c] + stats.epsilon);
    }
  }
  Tensor normalized(xv.shape());
  Tensor out(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const std::size_t i = r * d + c;
      normalized[i] = (xv[i] - mu[c]) * inv_std[c];
      out[i] = gv[c] * normalized[i] + bv[c];
    }
  }
  return tape.record(std::move(out), {&x, &gamma, &beta},
                     [x, gamma, beta, normalized = std::move(normalized), inv_std = std::move(inv_std), n, d,
                      training](const Tensor& g) {
                       const auto& gv = gamma.value();
                       if (gamma.requires_grad() || beta.requires_grad()) {
                         for (std::size_t r = 0; r < n; ++r) {
                           for (std::size_t c = 0; c < d; ++c) {
                             const std::size_t i = r * d + c;
                             if (gamma.requires_grad()) grad_of(gamma)[c] += g[i] * normalized[i];
                             if (beta.requires_grad()) grad_of(beta)[c] += g[i];
                           }
                         }
                       }
                       if (!x.requires_grad()) return;
                       Tensor& gx = grad_of(x);
                       if (!training) {
                         for (std::size_t r = 0; r < n; ++r) {
                           for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[r * d + c] * gv[c] * inv_std[c];
                         }
                         return;
                       }
                       const double nn = static_cast<double>(n);
                       for (std::size_t c = 0; c < d; ++c) {
                         double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                         for (std::size_t r = 0; r < n; ++r) {
                           const double dxhat = g[r * d + c] * gv[c];
                           sum_dxhat += dxhat;
                           sum_dxhat_xhat += dxhat * normalized[r * d + c];
                         }
                         for (std::size_t r = 0; r < n; ++r) {
                           const double dxhat = g[r * d + c] * gv[c];
                           gx[r * d + c] += inv_std[c] / nn *
                                            (nn * dxhat - sum_dxhat - normalized[r * d + c] * sum_dxhat_xhat);
                         }
                       }
                     });
}

Var embedding_lookup(Tape& tape, const Var& table, std::span<const std::int32_t> ids) {
  require_rank2("embedding_lookup", table);
  const auto& tv = table.value();
  const std::size_t vocab = tv.rows();
  const std::size_t d = tv.cols();
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw LookupError("embedding_lookup: id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(id) * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> owned(ids.begin(), ids.end());
  return tape.record(std::move(out), {&table}, [table, owned = std::move(owned), d](const Tensor& g) {
    Tensor& gt = grad_of(table);
    for (std::size_t i = 0; i < owned.size(); ++i) {
      double* dst = gt.data() + static_cast<std::size_t>(owned[i]) * d;
      const double* src = g.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

namespace {

// Per-step activations kept for backpropagation through time.
struct LstmCache {
  std::size_t batch = 0, steps = 0, hidden = 0;
  // All indexed [step s][row b][...] in processing order.
  std::vector<double> gates;      // s, b, 4h (activated i, f, o, g)
  std::vector<double> cell;       // s, b, h
  std::vector<double> cell_tanh;  // s, b, h
  std::vector<double> cell_prev;  // s, b, h
  std::vector<double> hidden_prev;  // s, b, h
};

}  // namespace

Var lstm_sequence(Tape& tape, const Var& x, const Tensor& mask, const Var& w_input,
                  const Var& w_hidden, const Var& bias, bool reverse) {
  require_rank2("lstm_sequence", x);
  require_rank2("lstm_sequence", w_input);
  require_rank2("lstm_sequence", w_hidden);
  const SeqLayout lay = layout_of(mask);
  const std::size_t B = lay.batch;
  const std::size_t T = lay.steps;
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  const std::size_t h = w_hidden.value().rows();
  const std::size_t h4 = 4 * h;
  if (xv.rows() != B * T || w_input.value().rows() != d || w_input.value().cols() != h4 ||
      w_hidden.value().cols() != h4 || bias.value().size() != h4) {
    throw DimensionError("lstm_sequence: inconsistent shapes x " + shape_to_string(xv.shape()) +
                         ", w_input " + shape_to_string(w_input.shape()) + ", w_hidden " +
                         shape_to_string(w_hidden.shape()) + ", bias " + shape_to_string(bias.shape()));
  }

  detail::RowMatrix projected = detail::view(xv) * detail::view(w_input.value());
  const auto& bv = bias.value();
  for (Eigen::Index r = 0; r < projected.rows(); ++r) {
    for (std::size_t c = 0; c < h4; ++c) projected(r, static_cast<Eigen::Index>(c)) += bv[c];
  }

  auto cache = std::make_shared<LstmCache>();
  cache->batch = B;
  cache->steps = T;
  cache->hidden = h;
  cache->gates.assign(T * B * h4, 0.0);
  cache->cell.assign(T * B * h, 0.0);
  cache->cell_tanh.assign(T * B * h, 0.0);
  cache->cell_prev.assign(T * B * h, 0.0);
  cache->hidden_prev.assign(T * B * h, 0.0);

  Tensor out(Shape{B * T, h}, 0.0);
  detail::RowMatrix h_state = detail::RowMatrix::Zero(B, h);
  detail::RowMatrix c_state = detail::RowMatrix::Zero(B, h);
  detail::RowMatrix pre(B, h4);
  const auto wh = detail::view(w_hidden.value());

  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    pre.noalias() = h_state * wh;
    for (std::size_t b = 0; b < B; ++b) {
      std::copy_n(h_state.data() + b * h, h, cache->hidden_prev.data() + (s * B + b) * h);
      std::copy_n(c_state.data() + b * h, h, cache->cell_prev.data() + (s * B + b) * h);
      if (mask[b * T + t] == 0.0) {
        std::copy_n(c_state.data() + b * h, h, cache->cell.data() + (s * B + b) * h);
        continue;
      }
      const double* z = projected.data() + (b * T + t) * h4;
      double* gate = cache->gates.data() + (s * B + b) * h4;
      for (std::size_t k = 0; k < h4; ++k) {
        const double v = z[k] + pre(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
        gate[k] = k < 3 * h ? sigmoid_of(v) : std::tanh(v);
      }
      double* cell = cache->cell.data() + (s * B + b) * h;
      double* cell_tanh = cache->cell_tanh.data() + (s * B + b) * h;
      double* y = out.data() + (b * T + t) * h;
      for (std::size_t k = 0; k < h; ++k) {
        const double c = gate[h + k] * c_state(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) +
                         gate[k] * gate[3 * h + k];
        cell[k] = c;
        cell_tanh[k] = std::tanh(c);
        y[k] = gate[2 * h + k] * cell_tanh[k];
        c_state(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = c;
        h_state(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = y[k];
      }
    }
  }

  return tape.record(std::move(out), {&x, &w_input, &w_hidden, &bias},
                     [x, mask, w_input, w_hidden, bias, reverse, cache, fault = backward_fault](const Tensor& g) {
                       const std::size_t B = cache->batch;
                       const std::size_t T = cache->steps;
                       const std::size_t h = cache->hidden;
                       const std::size_t h4 = 4 * h;
                       const auto wh = detail::view(w_hidden.value());
                       detail::RowMatrix d_projected = detail::RowMatrix::Zero(B * T, h4);
                       detail::RowMatrix dh_next = detail::RowMatrix::Zero(B, h);
                       detail::RowMatrix dc_next = detail::RowMatrix::Zero(B, h);
                       detail::RowMatrix dpre = detail::RowMatrix::Zero(B, h4);
                       detail::RowMatrix h_prev(B, h);
                       detail::RowMatrix dwh = detail::RowMatrix::Zero(h, h4);
                       for (std::size_t s = T; s-- > 0;) {
                         const std::size_t t = reverse ? T - 1 - s : s;
                         dpre.setZero();
                         for (std::size_t b = 0; b < B; ++b) {
                           std::copy_n(cache->hidden_prev.data() + (s * B + b) * h, h, h_prev.data() + b * h);
                           if (mask[b * T + t] == 0.0) continue;
                           const double* gate = cache->gates.data() + (s * B + b) * h4;
                           const double* cell_tanh = cache->cell_tanh.data() + (s * B + b) * h;
                           const double* cell_prev = cache->cell_prev.data() + (s * B + b) * h;
                           const double* gy = g.data() + (b * T + t) * h;
                           for (std::size_t k = 0; k < h; ++k) {
                             const auto bi = static_cast<Eigen::Index>(b);
                             const auto ki = static_cast<Eigen::Index>(k);
                             const double i_g = gate[k], f_g = gate[h + k], o_g = gate[2 * h + k],
                                          c_g = gate[3 * h + k];
                             const double dh = gy[k] + dh_next(bi, ki);
                             const double dc = dc_next(bi, ki) + dh * o_g * (1.0 - cell_tanh[k] * cell_tanh[k]);
                             dpre(bi, ki) = dc * c_g * i_g * (1.0 - i_g);
                             dpre(bi, static_cast<Eigen::Index>(h + k)) = dc * cell_prev[k] * f_g * (1.0 - f_g);
                             dpre(bi, static_cast<Eigen::Index>(2 * h + k)) = dh * cell_tanh[k] * o_g * (1.0 - o_g);
                             dpre(bi, static_cast<Eigen::Index>(3 * h + k)) = dc * i_g * (1.0 - c_g * c_g);
                             dc_next(bi, ki) = dc * f_g;
                           }
                         }
                         // Masked rows carry their state unchanged: dh/dc pass straight through.
                         detail::RowMatrix dh_prev = dpre * wh.transpose();
                         for (std::size_t b = 0; b < B; ++b) {
                           if (mask[b * T + t] == 0.0) {
                             dh_prev.row(static_cast<Eigen::Index>(b)) = dh_next.row(static_cast<Eigen::Index>(b));
                           } else {
                             std::copy_n(dpre.data() + b * h4, h4, d_projected.data() + (b * T + t) * h4);
                           }
                         }
                         dh_next = dh_prev;
                         dwh.noalias() += h_prev.transpose() * dpre;
                       }
                       if (x.requires_grad()) {
                         detail::view(grad_of(x)).noalias() += d_projected * detail::view(w_input.value()).transpose();
                       }
                       if (w_input.requires_grad()) {
                         detail::view(grad_of(w_input)).noalias() += detail::view(x.value()).transpose() * d_projected;
                       }
                       if (w_hidden.requires_grad()) {
                         detail::view(grad_of(w_hidden)) += fault * dwh;
                       }
                       if (bias.requires_grad()) {
                         Tensor& gb = grad_of(bias);
                         const Eigen::VectorXd col_sums = d_projected.colwise().sum().transpose();
                         for (std::size_t k = 0; k < h4; ++k) gb[k] += col_sums(static_cast<Eigen::Index>(k));
                       }
                     });
}

Var char_cnn(Tape& tape, const Var& char_table, std::span<const std::int32_t> char_ids,
             std::size_t word_len, const Var& kernel, const Var& bias, std::size_t width) {
  require_rank2("char_cnn", char_table);
  require_rank2("char_cnn", kernel);
  const auto& table = char_table.value();
  const std::size_t e = table.cols();
  const std::size_t out_dim = kernel.value().cols();
  if (width == 0 || word_len == 0 || char_ids.size() % word_len || kernel.value().rows() != width * e ||
      bias.value().size() != out_dim) {
    throw DimensionError("char_cnn: kernel " + shape_to_string(kernel.shape()) + " for width " +
                         std::to_string(width) + " and char dim " + std::to_string(e));
  }
  const std::size_t words = char_ids.size() / word_len;
  const std::size_t pad_left = (width - 1) / 2;
  for (auto id : char_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw LookupError("char_cnn: char id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(table.rows()));
    }
  }
  std::vector<std::size_t> lengths(words, 0);
  for (std::size_t w = 0; w < words; ++w) {
    while (lengths[w] < word_len && char_ids[w * word_len + lengths[w]] != 0) ++lengths[w];
  }

  // im2col: one row per (word, position), width*e columns.
  const std::size_t window = width * e;
  detail::RowMatrix columns = detail::RowMatrix::Zero(words * word_len, window);
  for (std::size_t w = 0; w < words; ++w) {
    for (std::size_t p = 0; p < lengths[w]; ++p) {
      for (std::size_t m = 0; m < width; ++m) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + m) - static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(lengths[w])) continue;
        const auto id = static_cast<std::size_t>(char_ids[w * word_len + static_cast<std::size_t>(src)]);
        std::copy_n(table.data() + id * e, e, columns.data() + (w * word_len + p) * window + m * e);
      }
    }
  }
  detail::RowMatrix pre = columns * detail::view(kernel.value());
  const auto& bv = bias.value();
  Tensor out(Shape{words, out_dim}, 0.0);
  // Winning position per (word, channel); word_len marks "no active winner".
  std::vector<std::size_t> winners(words * out_dim, word_len);
  for (std::size_t w = 0; w < words; ++w) {
    if (lengths[w] == 0) continue;
    for (std::size_t c = 0; c < out_dim; ++c) {
      std::size_t best = 0;
      double top = 0.0;
      for (std::size_t p = 0; p < lengths[w]; ++p) {
        const double v = std::max(0.0, pre(static_cast<Eigen::Index>(w * word_len + p), static_cast<Eigen::Index>(c)) + bv[c]);
        if (p == 0 || v > top) {
          top = v;
          best = p;
        }
      }
      out[w * out_dim + c] = top;
      if (top > 0.0) winners[w * out_dim + c] = best;
    }
  }
  std::vector<std::int32_t> owned(char_ids.begin(), char_ids.end());
  return tape.record(std::move(out), {&char_table, &kernel, &bias},
                     [char_table, kernel, bias, owned = std::move(owned), lengths = std::move(lengths),
                      winners = std::move(winners), columns = std::move(columns), words, word_len, width, e,
                      out_dim, pad_left](const Tensor& g) {
                       const std::size_t window = width * e;
                       detail::RowMatrix d_pre = detail::RowMatrix::Zero(words * word_len, out_dim);
                       for (std::size_t w = 0; w < words; ++w) {
                         for (std::size_t c = 0; c < out_dim; ++c) {
                           const std::size_t p = winners[w * out_dim + c];
                           if (p == word_len) continue;
                           d_pre(static_cast<Eigen::Index>(w * word_len + p), static_cast<Eigen::Index>(c)) += g[w * out_dim + c];
                         }
                       }
                       if (bias.requires_grad()) {
                         Tensor& gb = grad_of(bias);
                         const Eigen::VectorXd col_sums = d_pre.colwise().sum().transpose();
                         for (std::size_t c = 0; c < out_dim; ++c) gb[c] += col_sums(static_cast<Eigen::Index>(c));
                       }
                       if (kernel.requires_grad()) {
                         detail::view(grad_of(kernel)).noalias() += columns.transpose() * d_pre;
                       }
                       if (char_table.requires_grad()) {
                         const detail::RowMatrix d_columns = d_pre * detail::view(kernel.value()).transpose();
                         Tensor& gt = grad_of(char_table);
                         for (std::size_t w = 0; w < words; ++w) {
                           for (std::size_t p = 0; p < lengths[w]; ++p) {
                             for (std::size_t m = 0; m < width; ++m) {
                               const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + m) - static_cast<std::ptrdiff_t>(pad_left);
                               if (src < 0 || src >= static_cast<std::ptrdiff_t>(lengths[w])) continue;
                               const auto id = static_cast<std::size_t>(owned[w * word_len + static_cast<std::size_t>(src)]);
                               const double* from = d_columns.data() + (w * word_len + p) * window + m * e;
                               double* to = gt.data() + id * e;
                               for (std::size_t j = 0; j < e; ++j) to[j] += from[j];
                             }
                           }
                         }
                       }
                     });
}

}  // namespace drcn::ops
