#include "drcn/model/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "drcn/core/errors.hpp"

namespace drcn::model {

namespace {

const std::vector<std::string>& keys() {
  static const std::vector<std::string> k{
      "preset",          "num_layers",        "lstm_hidden",        "word_dim",       "char_emb_dim",
      "char_out_dim",    "char_kernel",       "max_word_len",       "max_len",        "ae_hidden",
      "ae_after_layers", "fc_hidden",         "num_classes",        "connection_mode", "carry_recurrent",
      "carry_attention", "carry_embedding",   "residual_projection", "use_attention",  "use_match_flag",
      "use_trainable_emb", "use_fixed_emb",   "use_char",           "embed_keep",     "fc_keep",
      "ae_keep",         "use_batch_norm",    "recon_weight"};
  return k;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string double_text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  const auto n = parse_number<long long>(key, v);
  if (n < 0) throw ConfigError("'" + key + "' must be non-negative");
  return static_cast<std::size_t>(n);
}

}  // namespace

std::string to_string(ConnectionMode mode) {
  switch (mode) {
    case ConnectionMode::kDense: return "dense";
    case ConnectionMode::kResidual: return "residual";
    case ConnectionMode::kPlain: return "plain";
  }
  return "dense";
}

ConnectionMode parse_connection_mode(const std::string& text) {
  if (text == "dense") return ConnectionMode::kDense;
  if (text == "residual") return ConnectionMode::kResidual;
  if (text == "plain") return ConnectionMode::kPlain;
  throw ConfigError("unknown connection mode '" + text + "' (dense, residual or plain)");
}

std::size_t ModelConfig::word_feature_width() const {
  return (use_trainable_emb ? word_dim : 0) + (use_fixed_emb ? word_dim : 0) + (use_char ? char_out_dim : 0) +
         (use_match_flag ? 1 : 0);
}

std::vector<int> ModelConfig::bottleneck_layers() const {
  if (ae_after_layers) return *ae_after_layers;
  std::vector<int> layers;
  if (connection_mode != ConnectionMode::kDense) return layers;
  for (int l = 1; l < num_layers; ++l) layers.push_back(l);
  return layers;
}

bool ModelConfig::has_bottleneck_after(int layer) const {
  const auto layers = bottleneck_layers();
  return std::find(layers.begin(), layers.end(), layer) != layers.end();
}

void ModelConfig::validate() const {
  if (num_layers < 1) throw ConfigError("num_layers must be at least 1");
  if (lstm_hidden == 0) throw ConfigError("lstm_hidden must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (fc_hidden == 0) throw ConfigError("fc_hidden must be positive");
  if (max_len == 0) throw ConfigError("max_len must be positive");
  if (word_feature_width() == 0) throw ConfigError("every word feature is disabled");
  if ((use_trainable_emb || use_fixed_emb) && word_dim == 0) throw ConfigError("word_dim must be positive");
  if (use_char && (char_emb_dim == 0 || char_out_dim == 0 || char_kernel == 0 || max_word_len == 0)) {
    throw ConfigError("character features need positive sizes");
  }
  for (double keep : {embed_keep, fc_keep, ae_keep}) {
    if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("keep probabilities must lie in (0, 1]");
  }
  if (!(recon_weight >= 0.0)) throw ConfigError("recon_weight must be non-negative");
  const auto layers = bottleneck_layers();
  if (!layers.empty() && connection_mode != ConnectionMode::kDense) {
    throw ConfigError("bottlenecks are only supported in dense mode");
  }
  for (int l : layers) {
    if (l < 1 || l > num_layers) {
      throw ConfigError("bottleneck layer " + std::to_string(l) + " outside 1.." + std::to_string(num_layers));
    }
  }
  if (!layers.empty() && ae_hidden == 0) throw ConfigError("ae_hidden must be positive");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_key_values() const {
  std::string ae = "default";
  if (ae_after_layers) {
    ae = ae_after_layers->empty() ? "none" : "";
    for (std::size_t i = 0; i < ae_after_layers->size(); ++i) {
      if (i) ae += ",";
      ae += std::to_string((*ae_after_layers)[i]);
    }
  }
  return {{"preset", preset},
          {"num_layers", std::to_string(num_layers)},
          {"lstm_hidden", std::to_string(lstm_hidden)},
          {"word_dim", std::to_string(word_dim)},
          {"char_emb_dim", std::to_string(char_emb_dim)},
          {"char_out_dim", std::to_string(char_out_dim)},
          {"char_kernel", std::to_string(char_kernel)},
          {"max_word_len", std::to_string(max_word_len)},
          {"max_len", std::to_string(max_len)},
          {"ae_hidden", std::to_string(ae_hidden)},
          {"ae_after_layers", ae},
          {"fc_hidden", std::to_string(fc_hidden)},
          {"num_classes", std::to_string(num_classes)},
          {"connection_mode", to_string(connection_mode)},
          {"carry_recurrent", bool_text(carry_recurrent)},
          {"carry_attention", bool_text(carry_attention)},
          {"carry_embedding", bool_text(carry_embedding)},
          {"residual_projection", bool_text(residual_projection)},
          {"use_attention", bool_text(use_attention)},
          {"use_match_flag", bool_text(use_match_flag)},
          {"use_trainable_emb", bool_text(use_trainable_emb)},
          {"use_fixed_emb", bool_text(use_fixed_emb)},
          {"use_char", bool_text(use_char)},
          {"embed_keep", double_text(embed_keep)},
          {"fc_keep", double_text(fc_keep)},
          {"ae_keep", double_text(ae_keep)},
          {"use_batch_norm", bool_text(use_batch_norm)},
          {"recon_weight", double_text(recon_weight)}};
}

bool ModelConfig::is_key(const std::string& key) {
  const auto& k = keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

void ModelConfig::set(const std::string& key, const std::string& v) {
  if (key == "preset") {
    preset = v;
  } else if (key == "num_layers") {
    num_layers = parse_number<int>(key, v);
  } else if (key == "lstm_hidden") {
    lstm_hidden = parse_size(key, v);
  } else if (key == "word_dim") {
    word_dim = parse_size(key, v);
  } else if (key == "char_emb_dim") {
    char_emb_dim = parse_size(key, v);
  } else if (key == "char_out_dim") {
    char_out_dim = parse_size(key, v);
  } else if (key == "char_kernel") {
    char_kernel = parse_size(key, v);
  } else if (key == "max_word_len") {
    max_word_len = parse_size(key, v);
  } else if (key == "max_len") {
    max_len = parse_size(key, v);
  } else if (key == "ae_hidden") {
    ae_hidden = parse_size(key, v);
  } else if (key == "ae_after_layers") {
    if (v == "default") {
      ae_after_layers.reset();
    } else if (v == "none" || v.empty()) {
      ae_after_layers = std::vector<int>{};
    } else {
      std::vector<int> layers;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) layers.push_back(parse_number<int>(key, item));
      ae_after_layers = layers;
    }
  } else if (key == "fc_hidden") {
    fc_hidden = parse_size(key, v);
  } else if (key == "num_classes") {
    num_classes = parse_number<int>(key, v);
  } else if (key == "connection_mode") {
    connection_mode = parse_connection_mode(v);
  } else if (key == "carry_recurrent") {
    carry_recurrent = parse_bool(key, v);
  } else if (key == "carry_attention") {
    carry_attention = parse_bool(key, v);
  } else if (key == "carry_embedding") {
    carry_embedding = parse_bool(key, v);
  } else if (key == "residual_projection") {
    residual_projection = parse_bool(key, v);
  } else if (key == "use_attention") {
    use_attention = parse_bool(key, v);
  } else if (key == "use_match_flag") {
    use_match_flag = parse_bool(key, v);
  } else if (key == "use_trainable_emb") {
    use_trainable_emb = parse_bool(key, v);
  } else if (key == "use_fixed_emb") {
    use_fixed_emb = parse_bool(key, v);
  } else if (key == "use_char") {
    use_char = parse_bool(key, v);
  } else if (key == "embed_keep") {
    embed_keep = parse_number<double>(key, v);
  } else if (key == "fc_keep") {
    fc_keep = parse_number<double>(key, v);
  } else if (key == "ae_keep") {
    ae_keep = parse_number<double>(key, v);
  } else if (key == "use_batch_norm") {
    use_batch_norm = parse_bool(key, v);
  } else if (key == "recon_weight") {
    recon_weight = parse_number<double>(key, v);
  } else {
    throw ConfigError("unknown model key '" + key + "'");
  }
}

std::vector<std::string> preset_names() {
  return {"paper-snli", "paper-quora", "paper-trecqa", "micro", "synthetic"};
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.preset = name;
  if (name == "paper-snli") return c;
  if (name == "paper-quora") {
    c.num_classes = 2;
    c.max_len = 25;
    c.use_batch_norm = false;
    return c;
  }
  if (name == "paper-trecqa") {
    c.num_classes = 2;
    c.max_len = 50;
    return c;
  }
  if (name == "micro") {
    c.num_layers = 2;
    c.lstm_hidden = 4;
    c.word_dim = 5;
    c.char_emb_dim = 3;
    c.char_out_dim = 4;
    c.max_word_len = 4;
    c.max_len = 3;
    c.ae_hidden = 6;
    c.fc_hidden = 8;
    return c;
  }
  if (name == "synthetic") {
    c.num_classes = 2;
    c.num_layers = 3;
    c.lstm_hidden = 16;
    c.word_dim = 24;
    c.use_char = false;
    c.use_match_flag = false;
    c.max_len = 12;
    c.ae_hidden = 48;
    c.fc_hidden = 64;
    c.use_batch_norm = false;
    c.embed_keep = 1.0;
    c.fc_keep = 1.0;
    c.ae_keep = 1.0;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace drcn::model
