#include "drcn/text/dataset.hpp"

#include <charconv>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "drcn/core/errors.hpp"
#include "drcn/text/tokenizer.hpp"

namespace drcn::text {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return {};
}

}  // namespace

DataFormat format_for_path(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.substr(path.size() - suffix.size()) == suffix;
  };
  return ends_with(".jsonl") || ends_with(".json") ? DataFormat::kJsonl : DataFormat::kTsv;
}

const std::vector<std::string>& label_names(int num_classes) {
  static const std::vector<std::string> nli{"entailment", "neutral", "contradiction"};
  static const std::vector<std::string> binary{"negative", "positive"};
  if (num_classes == 3) return nli;
  if (num_classes == 2) return binary;
  throw ConfigError("no label map for " + std::to_string(num_classes) + " classes");
}

std::optional<int> parse_label(std::string_view label, int num_classes) {
  const auto& names = label_names(num_classes);
  const std::string lowered = lowercase(label);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lowered == names[i]) return static_cast<int>(i);
  }
  int value = -1;
  const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
  if (ec == std::errc() && ptr == label.data() + label.size() && value >= 0 && value < num_classes) {
    return value;
  }
  return std::nullopt;
}

LoadResult load_pairs(const std::string& path, DataFormat format, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path);
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string label, first, second, group;
    if (format == DataFormat::kTsv) {
      const auto fields = split_tabs(line);
      if (fields.size() < 3) {
        ++result.skipped;
        continue;
      }
      label = fields[0];
      first = fields[1];
      second = fields[2];
      if (fields.size() > 3) group = fields[3];
    } else {
      nlohmann::json row;
      try {
        row = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!row.is_object() || !row.contains("label") || !row.contains("sentence1") || !row.contains("sentence2")) {
        ++result.skipped;
        continue;
      }
      label = json_scalar_to_string(row["label"]);
      first = json_scalar_to_string(row["sentence1"]);
      second = json_scalar_to_string(row["sentence2"]);
      if (row.contains("group_id")) group = json_scalar_to_string(row["group_id"]);
    }
    const auto id = parse_label(label, num_classes);
    SentencePair pair{tokenize(first), tokenize(second), id.value_or(-1), group};
    if (!id || pair.premise.empty() || pair.hypothesis.empty()) {
      ++result.skipped;
      continue;
    }
    result.pairs.push_back(std::move(pair));
  }
  if (result.skipped > 0) {
    std::cerr << "warning: skipped " << result.skipped << " unusable rows in " << path << '\n';
  }
  if (result.pairs.empty()) throw EmptyDatasetError("no usable rows in " + path);
  return result;
}

LoadResult load_pairs(const std::string& path, int num_classes) {
  return load_pairs(path, format_for_path(path), num_classes);
}

void save_pairs_tsv(const std::string& path, const std::vector<SentencePair>& pairs, int num_classes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path);
  const auto& names = label_names(num_classes);
  auto join = [](const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) s.push_back(' ');
      s += tokens[i];
    }
    return s;
  };
  for (const auto& p : pairs) {
    out << names.at(static_cast<std::size_t>(p.label)) << '\t' << join(p.premise) << '\t' << join(p.hypothesis);
    if (!p.group_id.empty()) out << '\t' << p.group_id;
    out << '\n';
  }
}

}  // namespace drcn::text
