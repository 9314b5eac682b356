#include "drcn/cli/run_config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <vector>

#include "drcn/core/errors.hpp"

namespace drcn::cli {

namespace {

constexpr std::array kPathKeys{"train", "dev", "test", "embeddings"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool is_path_key(const std::string& key) {
  return std::find(kPathKeys.begin(), kPathKeys.end(), key) != kPathKeys.end();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    model = model::preset(value);
  } else if (is_path_key(key)) {
    paths[key] = value;
  } else if (train::TrainConfig::is_key(key)) {
    train.set(key, value);
    if (key == "seed") seed_set = true;
  } else if (model::ModelConfig::is_key(key)) {
    model.set(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::path(const std::string& key) const {
  const auto it = paths.find(key);
  return it == paths.end() ? std::string() : it->second;
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : model.to_key_values()) out << k << '=' << v << '\n';
  for (const auto& [k, v] : train.to_key_values()) out << k << '=' << v << '\n';
  for (const auto& [k, v] : paths) out << k << '=' << v << '\n';
}

RunConfig preset_run_config(const std::string& preset) {
  RunConfig rc;
  rc.set("preset", preset);
  return rc;
}

RunConfig parse_run_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(t.substr(0, eq));
    if (std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; })) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    entries.emplace_back(std::move(key), trim(t.substr(eq + 1)));
  }
  RunConfig rc;
  for (const auto& [k, v] : entries) {
    if (k == "preset") rc.set(k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") rc.set(k, v);
  }
  rc.model.validate();
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  return parse_run_config(in);
}

}  // namespace drcn::cli
