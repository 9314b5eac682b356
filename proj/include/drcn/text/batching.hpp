#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drcn/core/tensor.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::text {

inline constexpr std::size_t kMaxWordLength = 16;

// 1.0 where lowercase(p_i) occurs among the lowercased tokens of q.
std::vector<double> exact_match_flags(const std::vector<std::string>& p, const std::vector<std::string>& q);

// One sentence side of a batch in padded batch-major layout (row b*steps + t).
struct SideBatch {
  std::size_t steps = 0;
  std::vector<std::int32_t> ids;    // B*steps, PAD beyond each sentence
  std::vector<std::int32_t> chars;  // B*steps*word_len, packed left, 0 = padding
  Tensor flags;                     // (B*steps) x 1
  Tensor mask;                      // B x steps
};

struct Batch {
  std::size_t size = 0;
  std::size_t word_len = 1;
  SideBatch premise;
  SideBatch hypothesis;
  std::vector<int> labels;
  std::vector<std::string> group_ids;
  std::vector<std::size_t> indices;  // positions in the source pair list
};

struct BatchOptions {
  std::size_t batch_size = 32;
  std::size_t max_len = 35;
  std::size_t max_word_len = kMaxWordLength;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

// Shuffles (when enabled) with a seeded Fisher-Yates pass, truncates each
// sentence at max_len and pads to the per-batch maximum length. Characters are
// truncated at max_word_len and padded to the per-batch longest word.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs, const Vocab& words, const Vocab& chars,
                                const BatchOptions& options);

// Single batch holding `pairs` in order.
Batch make_batch(const std::vector<SentencePair>& pairs, const Vocab& words, const Vocab& chars,
                 std::size_t max_len, std::size_t max_word_len = kMaxWordLength);

}  // namespace drcn::text
