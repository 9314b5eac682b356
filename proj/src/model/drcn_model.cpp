#include "drcn/model/drcn_model.hpp"

#include "drcn/core/errors.hpp"
#include "drcn/text/embeddings.hpp"

namespace drcn::model {

namespace {

// Scale of the random word tables used until pretrained vectors are loaded;
// roughly the per-component spread of GloVe vectors.
constexpr double kWordInitStddev = 0.3;

bool is_carried(const ModelConfig& c, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kEmbedding: return c.carry_embedding;
    case FeatureKind::kRecurrent: return c.carry_recurrent;
    case FeatureKind::kAttention: return c.carry_attention;
    case FeatureKind::kEncoded: return true;
  }
  return true;
}

struct WidthPlan {
  std::vector<std::size_t> inputs;        // x^1 .. x^{L+1}
  std::vector<std::size_t> transitions;   // transition output of layer l, before any bottleneck
};

WidthPlan plan_widths(const ModelConfig& c) {
  c.validate();
  const std::size_t rec = c.recurrent_width();
  const std::size_t word = c.word_feature_width();
  WidthPlan plan;
  plan.inputs.push_back(word);
  std::vector<Segment> segments{{FeatureKind::kEmbedding, word}};
  for (int l = 1; l <= c.num_layers; ++l) {
    std::size_t next = 0;
    switch (c.connection_mode) {
      case ConnectionMode::kDense: {
        std::vector<Segment> out{{FeatureKind::kRecurrent, rec}};
        if (c.use_attention) out.push_back({FeatureKind::kAttention, rec});
        for (const auto& s : segments) {
          if (is_carried(c, s.kind)) out.push_back(s);
        }
        segments = out;
        next = total_width(segments);
        break;
      }
      case ConnectionMode::kResidual:
        if (l == 1 && word != rec && !c.residual_projection) {
          throw ConfigError("residual connection sums width " + std::to_string(rec) + " with " +
                            std::to_string(word) + " and projection is disabled");
        }
        next = rec + (c.carry_embedding ? word : 0);
        break;
      case ConnectionMode::kPlain:
        next = rec * (c.use_attention ? 2 : 1);
        break;
    }
    plan.transitions.push_back(next);
    if (c.has_bottleneck_after(l)) {
      if (c.ae_hidden >= next) {
        throw ConfigError("ae_hidden " + std::to_string(c.ae_hidden) + " must be smaller than its input width " +
                          std::to_string(next));
      }
      next = c.ae_hidden;
      segments = {{FeatureKind::kEncoded, next}};
    }
    plan.inputs.push_back(next);
  }
  return plan;
}

Var dropout_if(Tape& tape, const Var& x, double keep, const ForwardOptions& options) {
  if (!options.training || keep >= 1.0) return x;
  if (!options.rng) throw ArgumentError("training forward with dropout needs an rng");
  return ops::dropout(tape, x, keep, true, *options.rng);
}

}  // namespace

std::vector<std::size_t> layer_widths(const ModelConfig& c) { return plan_widths(c).inputs; }

DrcnModel::DrcnModel(ModelConfig config, std::size_t word_vocab, std::size_t char_vocab, std::uint64_t seed)
    : config_(std::move(config)), word_vocab_(word_vocab), char_vocab_(char_vocab) {
  const auto plan = plan_widths(config_);
  widths_ = plan.inputs;
  if (word_vocab_ < 2 || char_vocab_ < 2) throw ConfigError("vocabularies must hold at least PAD and UNK");
  Rng rng(seed);
  const auto& c = config_;
  if (c.use_trainable_emb || c.use_fixed_emb) {
    const Tensor table = text::random_embeddings(word_vocab_, c.word_dim, seed, kWordInitStddev);
    if (c.use_trainable_emb) emb_trainable_ = params_.add("emb.trainable", table, true, true);
    if (c.use_fixed_emb) emb_fixed_ = params_.add("emb.fixed", table, true, false);
  }
  if (c.use_char) {
    Tensor chars(Shape{char_vocab_, c.char_emb_dim});
    for (std::size_t i = c.char_emb_dim; i < chars.size(); ++i) chars[i] = normal(rng, 0.0, 0.1);
    char_table_ = params_.add("char.table", std::move(chars), true, true);
    char_kernel_ = params_.add_glorot("char.kernel", c.char_kernel * c.char_emb_dim, c.char_out_dim, rng);
    char_bias_ = params_.add_constant("char.bias", Shape{c.char_out_dim}, 0.0);
  }

  std::size_t residual_width = widths_.front();
  for (int l = 1; l <= c.num_layers; ++l) {
    Layer layer;
    const std::string name = "layer" + std::to_string(l);
    layer.lstm = add_bilstm(params_, name, widths_[static_cast<std::size_t>(l - 1)], c.lstm_hidden, rng);
    layer.transition = add_transition(params_, c, l, residual_width, rng);
    residual_width = c.recurrent_width();
    if (c.has_bottleneck_after(l)) {
      layer.has_bottleneck = true;
      layer.bottleneck = add_bottleneck(params_, "ae" + std::to_string(l), plan.transitions[static_cast<std::size_t>(l - 1)],
                                        c.ae_hidden, rng);
    }
    layers_.push_back(layer);
  }

  const std::size_t v = interaction_width();
  fc1_w_ = params_.add_glorot("fc1.w", v, c.fc_hidden, rng);
  fc1_b_ = params_.add_constant("fc1.b", Shape{c.fc_hidden}, 0.0);
  if (c.use_batch_norm) {
    bn_gamma_ = params_.add_constant("bn.gamma", Shape{c.fc_hidden}, 1.0);
    bn_beta_ = params_.add_constant("bn.beta", Shape{c.fc_hidden}, 0.0);
    bn_stats_.running_mean = Tensor(Shape{c.fc_hidden}, 0.0);
    bn_stats_.running_var = Tensor(Shape{c.fc_hidden}, 1.0);
  }
  fc2_w_ = params_.add_glorot("fc2.w", c.fc_hidden, c.fc_hidden, rng);
  fc2_b_ = params_.add_constant("fc2.b", Shape{c.fc_hidden}, 0.0);
  out_w_ = params_.add_glorot("out.w", c.fc_hidden, static_cast<std::size_t>(c.num_classes), rng);
  out_b_ = params_.add_constant("out.b", Shape{static_cast<std::size_t>(c.num_classes)}, 0.0);
}

void DrcnModel::set_word_embeddings(const Tensor& table) {
  if (table.rank() != 2 || table.rows() != word_vocab_ || table.cols() != config_.word_dim) {
    throw DimensionError("embedding table " + shape_to_string(table.shape()) + " does not match vocabulary " +
                         std::to_string(word_vocab_) + " x " + std::to_string(config_.word_dim));
  }
  for (Var* t : {&emb_trainable_, &emb_fixed_}) {
    if (!t->defined()) continue;
    t->mutable_value() = table;
    std::fill_n(t->mutable_value().data(), config_.word_dim, 0.0);
  }
}

Var DrcnModel::word_rep(Tape& tape, const text::SideBatch& side, std::size_t word_len,
                        const ForwardOptions& options) {
  std::vector<Var> parts;
  if (emb_trainable_.defined()) {
    parts.push_back(dropout_if(tape, ops::embedding_lookup(tape, emb_trainable_, side.ids), config_.embed_keep,
                               options));
  }
  if (emb_fixed_.defined()) {
    parts.push_back(
        dropout_if(tape, ops::embedding_lookup(tape, emb_fixed_, side.ids), config_.embed_keep, options));
  }
  if (char_table_.defined()) {
    // Characters beyond the configured limit are dropped here.
    const std::size_t limit = std::min(word_len, config_.max_word_len);
    Var conv;
    if (limit == word_len) {
      conv = ops::char_cnn(tape, char_table_, side.chars, word_len, char_kernel_, char_bias_, config_.char_kernel);
    } else {
      std::vector<std::int32_t> trimmed;
      trimmed.reserve(side.ids.size() * limit);
      for (std::size_t w = 0; w < side.ids.size(); ++w) {
        trimmed.insert(trimmed.end(), side.chars.begin() + static_cast<std::ptrdiff_t>(w * word_len),
                       side.chars.begin() + static_cast<std::ptrdiff_t>(w * word_len + limit));
      }
      conv = ops::char_cnn(tape, char_table_, trimmed, limit, char_kernel_, char_bias_, config_.char_kernel);
    }
    parts.push_back(dropout_if(tape, conv, config_.embed_keep, options));
  }
  if (config_.use_match_flag) parts.push_back(Var::constant(side.flags));
  return ops::mask_rows(tape, ops::concat(tape, parts, 1), side.mask);
}

Var DrcnModel::classify(Tape& tape, const Var& v, const ForwardOptions& options) {
  auto x = dropout_if(tape, v, config_.fc_keep, options);
  x = ops::relu(tape, ops::linear(tape, x, fc1_w_, fc1_b_));
  if (config_.use_batch_norm) x = ops::batch_norm(tape, x, bn_gamma_, bn_beta_, bn_stats_, options.training);
  x = dropout_if(tape, x, config_.fc_keep, options);
  x = ops::relu(tape, ops::linear(tape, x, fc2_w_, fc2_b_));
  x = dropout_if(tape, x, config_.fc_keep, options);
  return ops::linear(tape, x, out_w_, out_b_);
}

ForwardResult DrcnModel::forward(Tape& tape, const text::Batch& batch, const ForwardOptions& options) {
  if (batch.size == 0) throw ArgumentError("forward on an empty batch");
  const auto& mp = batch.premise.mask;
  const auto& mq = batch.hypothesis.mask;
  ForwardResult result;

  LayerInput in_p, in_q;
  in_p.x = word_rep(tape, batch.premise, batch.word_len, options);
  in_q.x = word_rep(tape, batch.hypothesis, batch.word_len, options);
  for (auto* in : {&in_p, &in_q}) {
    in->segments = {{FeatureKind::kEmbedding, in->x.value().cols()}};
    in->residual = in->x;
    in->embedding = in->x;
  }
  if (options.diagnostics) {
    result.inputs_p.push_back(in_p.x.value());
    result.segments_p.push_back(in_p.segments);
  }

  std::vector<Var> recon_terms;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    auto h_p = bilstm_layer(tape, in_p.x, mp, layer.lstm);
    auto h_q = bilstm_layer(tape, in_q.x, mq, layer.lstm);
    Var a_p, a_q;
    if (config_.use_attention) {
      auto att = co_attention(tape, h_p, h_q, mp, mq);
      a_p = att.a_p;
      a_q = att.a_q;
      if (options.diagnostics) {
        result.alphas_p.push_back(att.alpha_p.value());
        result.alphas_q.push_back(att.alpha_q.value());
      }
    }
    in_p = layer_transition(tape, config_, in_p, h_p, a_p, layer.transition);
    in_q = layer_transition(tape, config_, in_q, h_q, a_q, layer.transition);
    if (options.diagnostics) result.transitions_p.push_back(in_p.x.value());
    if (layer.has_bottleneck) {
      for (auto* side : {&in_p, &in_q}) {
        const auto& mask = side == &in_p ? mp : mq;
        auto ae = bottleneck(tape, side->x, mask, layer.bottleneck, config_.ae_keep, options.training, options.rng);
        recon_terms.push_back(ae.recon_loss);
        side->x = ae.encoded;
        side->segments = {{FeatureKind::kEncoded, ae.encoded.value().cols()}};
      }
    }
    if (options.diagnostics) {
      result.inputs_p.push_back(in_p.x.value());
      result.segments_p.push_back(in_p.segments);
    }
  }

  result.interaction = pool_and_interact(tape, in_p.x, in_q.x, mp, mq, options.diagnostics ? &result.pool_p : nullptr,
                                         options.diagnostics ? &result.pool_q : nullptr);
  result.logits = classify(tape, result.interaction, options);
  Tape scratch(false);
  result.probabilities = ops::softmax_rows(scratch, result.logits).value();
  if (!recon_terms.empty()) result.recon = ops::add_n(tape, recon_terms);
  return result;
}

LossTerms DrcnModel::loss(Tape& tape, const ForwardResult& result, std::span<const int> labels) const {
  LossTerms terms;
  auto xent = ops::softmax_cross_entropy(tape, result.logits, labels);
  terms.xent = xent.value().item();
  if (result.recon.defined()) {
    terms.recon = result.recon.value().item();
    terms.total = ops::add(tape, xent, ops::scale(tape, result.recon, config_.recon_weight));
  } else {
    terms.total = xent;
  }
  return terms;
}

Tensor DrcnModel::predict(const text::Batch& batch) {
  Tape tape(false);
  return forward(tape, batch, ForwardOptions{}).probabilities;
}

}  // namespace drcn::model
