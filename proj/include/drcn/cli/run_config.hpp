#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "drcn/model/config.hpp"
#include "drcn/train/train_config.hpp"

namespace drcn::cli {

// Flat key=value run file covering the model, the optimiser and data paths.
// "preset" is applied before every other key wherever it appears; blank
// lines and lines starting with '#' are ignored.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  std::map<std::string, std::string> paths;  // train, dev, test, embeddings
  bool seed_set = false;

  // Throws ConfigError for unknown keys and bad values.
  void set(const std::string& key, const std::string& value);
  // "key=value" override from the command line.
  void apply(const std::string& assignment);
  std::string path(const std::string& key) const;

  void write(std::ostream& out) const;
};

bool is_path_key(const std::string& key);

RunConfig preset_run_config(const std::string& preset);

// Throws ConfigError on duplicate keys, unknown keys, malformed lines or an
// unknown preset, IoError when the file cannot be read.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

}  // namespace drcn::cli
