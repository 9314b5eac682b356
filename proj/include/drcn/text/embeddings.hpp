#pragma once

#include <cstdint>
#include <string>

#include "drcn/core/tensor.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::text {

inline constexpr double kOovStddev = 0.01;

struct EmbeddingTable {
  Tensor matrix;  // |V| x d
  bool trainable = false;
  std::size_t found = 0;   // vocabulary entries present in the file
  double coverage = 0.0;   // found / (|V| - 2); the reserved ids are not counted
};

// Random initialisation used for out-of-vocabulary rows: N(0, stddev^2) drawn
// row by row in id order from `seed`; the PAD row is zero.
Tensor random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed,
                         double stddev = kOovStddev);

// Loads GloVe-format text ("token v1 ... vd" per line). Rows for vocabulary
// tokens found in the file are copied; all others stay random. An empty path
// or empty file leaves every row random. Lines whose vector width differs from
// `dim` raise FormatError.
EmbeddingTable load_glove(const std::string& path, const Vocab& vocab, std::size_t dim, std::uint64_t seed,
                          double oov_stddev = kOovStddev);

}  // namespace drcn::text
