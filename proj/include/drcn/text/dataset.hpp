#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drcn::text {

struct SentencePair {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  int label = 0;
  std::string group_id;  // empty when the task has no grouping
};

enum class DataFormat { kTsv, kJsonl };

// Picks jsonl for *.jsonl / *.json paths, tsv otherwise.
DataFormat format_for_path(std::string_view path);

// Label maps: 3 classes -> entailment/neutral/contradiction, 2 classes ->
// negative/positive. Decimal class ids below num_classes are also accepted.
std::optional<int> parse_label(std::string_view label, int num_classes);
const std::vector<std::string>& label_names(int num_classes);

struct LoadResult {
  std::vector<SentencePair> pairs;
  std::size_t skipped = 0;  // rows with unknown labels or empty sentences
};

// TSV rows: label<TAB>sentence1<TAB>sentence2[<TAB>group_id].
// JSONL rows: {"label": ..., "sentence1": ..., "sentence2": ..., "group_id": ...}.
// Throws IoError when the file cannot be read and EmptyDatasetError when no
// usable rows remain.
LoadResult load_pairs(const std::string& path, DataFormat format, int num_classes);
LoadResult load_pairs(const std::string& path, int num_classes);

// Writes pairs back as TSV (tokens joined by single spaces).
void save_pairs_tsv(const std::string& path, const std::vector<SentencePair>& pairs, int num_classes);

}  // namespace drcn::text
