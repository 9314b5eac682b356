#include "drcn/text/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <vector>

#include "drcn/core/errors.hpp"
#include "drcn/core/rng.hpp"

namespace drcn::text {

namespace {

bool is_number(std::string_view f) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  return ec == std::errc() && ptr == f.data() + f.size();
}

}  // namespace

Tensor random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, double stddev) {
  Tensor table(Shape{vocab_size, dim}, 0.0);
  Rng rng(seed);
  for (std::size_t r = 0; r < vocab_size; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = normal(rng, 0.0, stddev);
      if (r != static_cast<std::size_t>(Vocab::kPad)) table.at(r, c) = v;
    }
  }
  return table;
}

EmbeddingTable load_glove(const std::string& path, const Vocab& vocab, std::size_t dim, std::uint64_t seed,
                          double oov_stddev) {
  EmbeddingTable result;
  result.matrix = random_embeddings(vocab.size(), dim, seed, oov_stddev);
  if (path.empty()) return result;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read embeddings " + path);

  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto space = rest.find(' ');
      const auto field = rest.substr(0, space);
      if (!field.empty()) fields.push_back(field);
      if (space == std::string_view::npos) break;
      rest.remove_prefix(space + 1);
    }
    if (fields.size() < dim + 1) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(fields.size() - 1));
    }
    // Tokens may themselves contain spaces; the last `dim` fields are the vector.
    const std::size_t token_fields = fields.size() - dim;
    if (token_fields > 1 && is_number(fields[1])) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(fields.size() - 1));
    }
    std::string token(fields[0]);
    for (std::size_t k = 1; k < token_fields; ++k) {
      token.push_back(' ');
      token.append(fields[k]);
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto f = fields[token_fields + k];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[k]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad value '" + std::string(f) + "'");
      }
    }
    if (!vocab.contains(token)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(token));
    if (id == static_cast<std::size_t>(Vocab::kPad) || id == static_cast<std::size_t>(Vocab::kUnk)) continue;
    std::copy(values.begin(), values.end(), result.matrix.data() + id * dim);
    if (!seen[id]) {
      seen[id] = true;
      ++result.found;
    }
  }
  const std::size_t regular = vocab.size() > 2 ? vocab.size() - 2 : 0;
  result.coverage = regular ? static_cast<double>(result.found) / static_cast<double>(regular) : 0.0;
  return result;
}

}  // namespace drcn::text
