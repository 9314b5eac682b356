#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace drcn::model {

enum class ConnectionMode { kDense, kResidual, kPlain };

std::string to_string(ConnectionMode mode);
ConnectionMode parse_connection_mode(const std::string& text);

struct ModelConfig {
  std::string preset = "paper-snli";

  int num_layers = 5;
  std::size_t lstm_hidden = 100;  // per direction
  std::size_t word_dim = 300;
  std::size_t char_emb_dim = 16;
  std::size_t char_out_dim = 32;
  std::size_t char_kernel = 3;
  std::size_t max_word_len = 16;
  std::size_t max_len = 35;
  std::size_t ae_hidden = 200;
  // 1-based layer indices followed by a bottleneck. Unset means every layer
  // but the last in dense mode and none otherwise.
  std::optional<std::vector<int>> ae_after_layers;
  std::size_t fc_hidden = 1000;
  int num_classes = 3;

  ConnectionMode connection_mode = ConnectionMode::kDense;
  // Dense mode: which feature kinds of x^l are carried into x^{l+1}.
  bool carry_recurrent = true;
  bool carry_attention = true;
  bool carry_embedding = true;
  // Residual mode: project the residual stream when widths differ.
  bool residual_projection = true;

  bool use_attention = true;
  bool use_match_flag = true;
  bool use_trainable_emb = true;
  bool use_fixed_emb = true;
  bool use_char = true;

  double embed_keep = 0.5;
  double fc_keep = 0.8;
  double ae_keep = 0.8;
  bool use_batch_norm = true;
  double recon_weight = 1.0;

  // Widths derived from the fields above.
  std::size_t word_feature_width() const;
  std::size_t recurrent_width() const { return 2 * lstm_hidden; }
  std::vector<int> bottleneck_layers() const;
  bool has_bottleneck_after(int layer) const;

  // Throws ConfigError when the combination is not constructible.
  void validate() const;

  // Flat key=value view, in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  // Sets one field from text; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  static bool is_key(const std::string& key);

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.to_key_values() == b.to_key_values();
  }
};

// Presets: paper-snli, paper-quora, paper-trecqa, micro, synthetic.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace drcn::model
