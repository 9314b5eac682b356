#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace drcn::train {

struct TrainConfig {
  double lr = 0.001;
  double decay = 0.85;        // lr factor after an epoch without a dev improvement
  double rho = 0.9;
  double epsilon = 1e-8;
  double l2 = 1e-6;           // every trainable parameter except embedding tables
  std::size_t batch_size = 32;
  int epochs = 30;
  int patience = 5;           // epochs without improvement before stopping; 0 disables
  std::uint64_t seed = 1;
  double clip_norm = 5.0;     // global gradient norm; 0 disables
  std::size_t max_steps = 0;  // 0 = no step budget

  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  void set(const std::string& key, const std::string& value);
  static bool is_key(const std::string& key);
};

}  // namespace drcn::train
