#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drcn/core/ops.hpp"
#include "drcn/model/config.hpp"
#include "drcn/model/parameters.hpp"

// Building blocks of the network. All sequence tensors use the padded
// batch-major layout of drcn::ops ((B*T) x d rows, B x T masks).
namespace drcn::model {

// Mask of shape (B*rows) x cols where entry (b*rows + i, j) = mask_cols(b, j).
Tensor expand_mask(const Tensor& mask_cols, std::size_t rows);

struct LstmParams {
  Var w_input;
  Var w_hidden;
  Var bias;
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

// Registers "<prefix>.fw.*" and "<prefix>.bw.*". Forget-gate biases start at 1.
BiLstmParams add_bilstm(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                        Rng& rng);

// Forward and backward LSTMs concatenated per step: (B*T) x 2h, padded rows 0.
Var bilstm_layer(Tape& tape, const Var& x, const Tensor& mask, const BiLstmParams& p);

struct CoAttention {
  Var scores;   // (B*I) x J cosine scores
  Var alpha_p;  // (B*I) x J, rows stochastic over real j
  Var alpha_q;  // (B*J) x I
  Var a_p;      // (B*I) x 2h, padded rows 0
  Var a_q;      // (B*J) x 2h
};

CoAttention co_attention(Tape& tape, const Var& h_p, const Var& h_q, const Tensor& mask_p, const Tensor& mask_q);

enum class FeatureKind { kEmbedding, kRecurrent, kAttention, kEncoded };

struct Segment {
  FeatureKind kind;
  std::size_t width;
};

// Layer input together with the provenance of its columns (dense mode) or the
// residual stream it carries (residual mode).
struct LayerInput {
  Var x;
  std::vector<Segment> segments;
  Var residual;  // residual mode only
  Var embedding;  // word features, kept for embedding carry in residual mode
};

std::size_t total_width(const std::vector<Segment>& segments);

struct TransitionParams {
  Var projection;  // residual mode, only when widths differ
};

// Adds a residual projection for layer `layer` when the config needs one.
TransitionParams add_transition(ParameterStore& store, const ModelConfig& config, int layer,
                                std::size_t residual_width, Rng& rng);

// x^{l+1} from x^l, h^l and a^l (a^l undefined when attention is off).
//   dense:    [h; a; carried segments of x]
//   residual: r' = h + a + proj(r); x' = [r'; word features] if carry_embedding
//   plain:    [h; a] or h
LayerInput layer_transition(Tape& tape, const ModelConfig& config, const LayerInput& in, const Var& h,
                            const Var& a, const TransitionParams& params);

struct BottleneckParams {
  Var w_encode;
  Var b_encode;
  Var w_decode;
  Var b_decode;
};

BottleneckParams add_bottleneck(ParameterStore& store, const std::string& prefix, std::size_t input,
                                std::size_t hidden, Rng& rng);

struct BottleneckOutput {
  Var encoded;     // (B*T) x hidden, padded rows 0
  Var recon_loss;  // scalar mean squared error over real rows
};

// encoded = act(x We + be) with act ReLU (or identity when `linear`);
// recon = encoded Wd + bd scored against x. Dropout applies only to what
// flows forward.
BottleneckOutput bottleneck(Tape& tape, const Var& x, const Tensor& mask, const BottleneckParams& p,
                            double keep, bool training, Rng* rng, bool linear = false);

// p, q = max over time; v = [p; q; p+q; p-q; |p-q|] per pair.
Var pool_and_interact(Tape& tape, const Var& features_p, const Var& features_q, const Tensor& mask_p,
                      const Tensor& mask_q, ops::PoolRecord* record_p = nullptr,
                      ops::PoolRecord* record_q = nullptr);

}  // namespace drcn::model
