#include "drcn/train/train_config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "drcn/core/errors.hpp"

namespace drcn::train {

namespace {

constexpr std::array kKeys{"lr",   "decay", "rho",       "epsilon",  "l2",       "batch_size",
                           "epochs", "patience", "seed", "clip_norm", "max_steps"};

std::string format(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError("train config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("train config: '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train config: lr must be positive");
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("train config: decay must lie in (0, 1)");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("train config: rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train config: epsilon must be positive");
  if (l2 < 0.0) throw ConfigError("train config: l2 must be non-negative");
  if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
  if (epochs <= 0) throw ConfigError("train config: epochs must be positive");
  if (patience < 0) throw ConfigError("train config: patience must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("train config: clip_norm must be non-negative");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
  return {{"lr", format(lr)},
          {"decay", format(decay)},
          {"rho", format(rho)},
          {"epsilon", format(epsilon)},
          {"l2", format(l2)},
          {"batch_size", std::to_string(batch_size)},
          {"epochs", std::to_string(epochs)},
          {"patience", std::to_string(patience)},
          {"seed", std::to_string(seed)},
          {"clip_norm", format(clip_norm)},
          {"max_steps", std::to_string(max_steps)}};
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "lr") lr = to_double(key, value);
  else if (key == "decay") decay = to_double(key, value);
  else if (key == "rho") rho = to_double(key, value);
  else if (key == "epsilon") epsilon = to_double(key, value);
  else if (key == "l2") l2 = to_double(key, value);
  else if (key == "batch_size") batch_size = to_int<std::size_t>(key, value);
  else if (key == "epochs") epochs = to_int<int>(key, value);
  else if (key == "patience") patience = to_int<int>(key, value);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, value);
  else if (key == "clip_norm") clip_norm = to_double(key, value);
  else if (key == "max_steps") max_steps = to_int<std::size_t>(key, value);
  else throw ConfigError("train config: unknown key '" + key + "'");
}

bool TrainConfig::is_key(const std::string& key) {
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

}  // namespace drcn::train
