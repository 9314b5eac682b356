#include "drcn/model/layers.hpp"

#include "drcn/core/errors.hpp"

namespace drcn::model {

Tensor expand_mask(const Tensor& mask_cols, std::size_t rows) {
  const std::size_t batch = mask_cols.rank() == 1 ? 1 : mask_cols.rows();
  const std::size_t cols = mask_cols.rank() == 1 ? mask_cols.size() : mask_cols.cols();
  Tensor out(Shape{batch * rows, cols});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(mask_cols.data() + b * cols, cols, out.data() + (b * rows + i) * cols);
    }
  }
  return out;
}

namespace {

LstmParams add_lstm(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                    Rng& rng) {
  LstmParams p;
  p.w_input = store.add_glorot(prefix + ".w_input", input, 4 * hidden, rng);
  p.w_hidden = store.add_glorot(prefix + ".w_hidden", hidden, 4 * hidden, rng);
  Tensor bias(Shape{4 * hidden}, 0.0);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) bias[k] = 1.0;
  p.bias = store.add(prefix + ".bias", std::move(bias));
  return p;
}

bool carried(const ModelConfig& config, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kEmbedding: return config.carry_embedding;
    case FeatureKind::kRecurrent: return config.carry_recurrent;
    case FeatureKind::kAttention: return config.carry_attention;
    case FeatureKind::kEncoded: return true;
  }
  return true;
}

}  // namespace

BiLstmParams add_bilstm(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                        Rng& rng) {
  BiLstmParams p;
  p.forward = add_lstm(store, prefix + ".fw", input, hidden, rng);
  p.backward = add_lstm(store, prefix + ".bw", input, hidden, rng);
  return p;
}

Var bilstm_layer(Tape& tape, const Var& x, const Tensor& mask, const BiLstmParams& p) {
  auto fw = ops::lstm_sequence(tape, x, mask, p.forward.w_input, p.forward.w_hidden, p.forward.bias, false);
  auto bw = ops::lstm_sequence(tape, x, mask, p.backward.w_input, p.backward.w_hidden, p.backward.bias, true);
  return ops::concat(tape, {fw, bw}, 1);
}

CoAttention co_attention(Tape& tape, const Var& h_p, const Var& h_q, const Tensor& mask_p, const Tensor& mask_q) {
  const std::size_t batch = mask_p.rank() == 1 ? 1 : mask_p.rows();
  const std::size_t steps_p = mask_p.size() / batch;
  const std::size_t steps_q = mask_q.size() / batch;
  CoAttention out;
  out.scores = ops::cosine_scores(tape, h_p, h_q, batch);
  out.alpha_p = ops::softmax_masked(tape, out.scores, expand_mask(mask_q, steps_p));
  out.a_p = ops::mask_rows(tape, ops::block_matmul(tape, out.alpha_p, h_q, batch), mask_p);
  auto scores_t = ops::block_transpose(tape, out.scores, batch);
  out.alpha_q = ops::softmax_masked(tape, scores_t, expand_mask(mask_p, steps_q));
  out.a_q = ops::mask_rows(tape, ops::block_matmul(tape, out.alpha_q, h_p, batch), mask_q);
  return out;
}

std::size_t total_width(const std::vector<Segment>& segments) {
  std::size_t w = 0;
  for (const auto& s : segments) w += s.width;
  return w;
}

TransitionParams add_transition(ParameterStore& store, const ModelConfig& config, int layer,
                                std::size_t residual_width, Rng& rng) {
  TransitionParams p;
  if (config.connection_mode != ConnectionMode::kResidual || residual_width == config.recurrent_width()) return p;
  if (!config.residual_projection) {
    throw ConfigError("residual connection at layer " + std::to_string(layer) + " sums width " +
                      std::to_string(config.recurrent_width()) + " with " + std::to_string(residual_width) +
                      " and projection is disabled");
  }
  p.projection = store.add_glorot("layer" + std::to_string(layer) + ".residual_proj", residual_width,
                                  config.recurrent_width(), rng);
  return p;
}

LayerInput layer_transition(Tape& tape, const ModelConfig& config, const LayerInput& in, const Var& h,
                            const Var& a, const TransitionParams& params) {
  const std::size_t hw = h.value().cols();
  LayerInput out;
  out.embedding = in.embedding;
  switch (config.connection_mode) {
    case ConnectionMode::kDense: {
      std::vector<Var> parts{h};
      out.segments.push_back({FeatureKind::kRecurrent, hw});
      if (a.defined()) {
        parts.push_back(a);
        out.segments.push_back({FeatureKind::kAttention, a.value().cols()});
      }
      // Consecutive carried segments are taken as one slice.
      const std::size_t in_width = in.x.value().cols();
      std::size_t offset = 0;
      std::size_t run_begin = 0;
      std::size_t run_end = 0;
      auto flush = [&] {
        if (run_end == run_begin) return;
        parts.push_back(run_end - run_begin == in_width ? in.x : ops::slice(tape, in.x, 1, run_begin, run_end));
      };
      for (const auto& seg : in.segments) {
        if (carried(config, seg.kind)) {
          if (run_end != offset) {
            flush();
            run_begin = offset;
          }
          run_end = offset + seg.width;
          out.segments.push_back(seg);
        }
        offset += seg.width;
      }
      flush();
      out.x = ops::concat(tape, parts, 1);
      return out;
    }
    case ConnectionMode::kResidual: {
      Var stream = in.residual;
      if (params.projection.defined()) stream = ops::matmul(tape, stream, params.projection);
      if (stream.value().cols() != hw) {
        throw ConfigError("residual connection sums width " + std::to_string(hw) + " with " +
                          std::to_string(stream.value().cols()));
      }
      std::vector<Var> terms{h};
      if (a.defined()) terms.push_back(a);
      terms.push_back(stream);
      out.residual = ops::add_n(tape, terms);
      out.segments.push_back({FeatureKind::kRecurrent, hw});
      if (config.carry_embedding) {
        out.x = ops::concat(tape, {out.residual, in.embedding}, 1);
        out.segments.push_back({FeatureKind::kEmbedding, in.embedding.value().cols()});
      } else {
        out.x = out.residual;
      }
      return out;
    }
    case ConnectionMode::kPlain: {
      out.segments.push_back({FeatureKind::kRecurrent, hw});
      if (a.defined()) {
        out.segments.push_back({FeatureKind::kAttention, a.value().cols()});
        out.x = ops::concat(tape, {h, a}, 1);
      } else {
        out.x = h;
      }
      return out;
    }
  }
  return out;
}

BottleneckParams add_bottleneck(ParameterStore& store, const std::string& prefix, std::size_t input,
                                std::size_t hidden, Rng& rng) {
  BottleneckParams p;
  p.w_encode = store.add_glorot(prefix + ".w_encode", input, hidden, rng);
  p.b_encode = store.add_constant(prefix + ".b_encode", Shape{hidden}, 0.0);
  p.w_decode = store.add_glorot(prefix + ".w_decode", hidden, input, rng);
  p.b_decode = store.add_constant(prefix + ".b_decode", Shape{input}, 0.0);
  return p;
}

BottleneckOutput bottleneck(Tape& tape, const Var& x, const Tensor& mask, const BottleneckParams& p, double keep,
                            bool training, Rng* rng, bool linear) {
  auto pre = ops::linear(tape, x, p.w_encode, p.b_encode);
  auto encoded = ops::mask_rows(tape, linear ? pre : ops::relu(tape, pre), mask);
  auto recon = ops::linear(tape, encoded, p.w_decode, p.b_decode);
  BottleneckOutput out;
  out.recon_loss = ops::masked_mse(tape, recon, x, mask);
  if (training && keep < 1.0) {
    if (!rng) throw ArgumentError("bottleneck: dropout needs an rng");
    encoded = ops::dropout(tape, encoded, keep, training, *rng);
  }
  out.encoded = encoded;
  return out;
}

Var pool_and_interact(Tape& tape, const Var& features_p, const Var& features_q, const Tensor& mask_p,
                      const Tensor& mask_q, ops::PoolRecord* record_p, ops::PoolRecord* record_q) {
  auto p = ops::max_pool_time(tape, features_p, mask_p, record_p);
  auto q = ops::max_pool_time(tape, features_q, mask_q, record_q);
  auto diff = ops::sub(tape, p, q);
  return ops::concat(tape, {p, q, ops::add(tape, p, q), diff, ops::abs(tape, diff)}, 1);
}

}  // namespace drcn::model
