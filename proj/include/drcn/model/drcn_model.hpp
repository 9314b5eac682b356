#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drcn/core/ops.hpp"
#include "drcn/model/config.hpp"
#include "drcn/model/layers.hpp"
#include "drcn/model/parameters.hpp"
#include "drcn/text/batching.hpp"

namespace drcn::model {

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;         // required when training with dropout
  bool diagnostics = false;   // keep per-layer tensors in the result
};

struct ForwardResult {
  Var logits;                 // B x num_classes
  Tensor probabilities;       // B x num_classes
  Var recon;                  // scalar sum of bottleneck losses; undefined without bottlenecks
  Var interaction;            // B x 5*d_final

  // Filled when diagnostics are requested.
  std::vector<Tensor> alphas_p;  // per layer, (B*I) x J
  std::vector<Tensor> alphas_q;  // per layer, (B*J) x I
  std::vector<Tensor> inputs_p;  // x^1 .. x^{L+1} for the premise side
  std::vector<Tensor> transitions_p;  // per layer, transition output before any bottleneck
  std::vector<std::vector<Segment>> segments_p;
  ops::PoolRecord pool_p;
  ops::PoolRecord pool_q;
};

struct LossTerms {
  Var total;           // xent + recon_weight * recon
  double xent = 0.0;
  double recon = 0.0;
};

// Densely-connected recurrent co-attentive network for sentence pairs. Both
// sentences run through the same weights.
class DrcnModel {
 public:
  DrcnModel(ModelConfig config, std::size_t word_vocab, std::size_t char_vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  ops::BatchNormStats& bn_stats() { return bn_stats_; }
  const ops::BatchNormStats& bn_stats() const { return bn_stats_; }
  std::size_t word_vocab() const { return word_vocab_; }
  std::size_t char_vocab() const { return char_vocab_; }

  // Widths of x^1 .. x^{L+1}; the last entry is the pooled feature width.
  const std::vector<std::size_t>& layer_input_widths() const { return widths_; }
  std::size_t interaction_width() const { return 5 * widths_.back(); }

  // Copies `table` into both word embedding tables (PAD row forced to zero).
  void set_word_embeddings(const Tensor& table);

  // Word features [e_tr; e_fix; c; f] for one side, padded rows zero.
  Var word_rep(Tape& tape, const text::SideBatch& side, std::size_t word_len, const ForwardOptions& options);

  ForwardResult forward(Tape& tape, const text::Batch& batch, const ForwardOptions& options);

  // Classifier head on the interaction vector.
  Var classify(Tape& tape, const Var& v, const ForwardOptions& options);

  LossTerms loss(Tape& tape, const ForwardResult& result, std::span<const int> labels) const;

  // Eval-mode class probabilities without recording gradients.
  Tensor predict(const text::Batch& batch);

 private:
  struct Layer {
    BiLstmParams lstm;
    TransitionParams transition;
    bool has_bottleneck = false;
    BottleneckParams bottleneck;
  };

  ModelConfig config_;
  std::size_t word_vocab_;
  std::size_t char_vocab_;
  ParameterStore params_;
  std::vector<std::size_t> widths_;

  Var emb_trainable_;
  Var emb_fixed_;
  Var char_table_;
  Var char_kernel_;
  Var char_bias_;
  std::vector<Layer> layers_;
  Var fc1_w_, fc1_b_, bn_gamma_, bn_beta_, fc2_w_, fc2_b_, out_w_, out_b_;
  ops::BatchNormStats bn_stats_;
};

// Widths of x^1 .. x^{L+1} implied by a config (throws ConfigError when the
// config is not constructible).
std::vector<std::size_t> layer_widths(const ModelConfig& config);

}  // namespace drcn::model
