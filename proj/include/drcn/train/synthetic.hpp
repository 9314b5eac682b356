#pragma once

#include <cstdint>
#include <vector>

#include "drcn/text/dataset.hpp"

namespace drcn::train {

// Alignment task: the premise is a run of distinct tokens; the hypothesis is
// a shuffled subset of them. Label 1 keeps the subset intact, label 0
// replaces exactly one hypothesis token with a word absent from the premise.
struct AlignmentTaskOptions {
  std::size_t pairs = 5000;
  std::size_t vocab = 40;
  std::size_t premise_min = 6;
  std::size_t premise_max = 10;
  std::size_t hypothesis_min = 3;
  std::size_t hypothesis_max = 6;
  std::uint64_t seed = 7;
};

std::vector<text::SentencePair> make_alignment_task(const AlignmentTaskOptions& options);

struct DataSplit {
  std::vector<text::SentencePair> train;
  std::vector<text::SentencePair> dev;
  std::vector<text::SentencePair> test;
};

// Contiguous split: the first `dev` pairs after the training block go to dev,
// the last `test` pairs to test.
DataSplit split_pairs(const std::vector<text::SentencePair>& pairs, std::size_t dev, std::size_t test);

// Uniform random pairs over `vocab` words w0..w{vocab-1}, sentence lengths in
// [1, max_len], labels uniform over the classes.
std::vector<text::SentencePair> random_pairs(std::size_t count, std::size_t vocab, std::size_t max_len,
                                             int num_classes, std::uint64_t seed);

}  // namespace drcn::train
