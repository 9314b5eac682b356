#pragma once

#include <string>
#include <vector>

#include "drcn/core/rng.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/text/batching.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::test {

struct PairData {
  std::vector<text::SentencePair> pairs;
  text::Vocab words;
  text::Vocab chars;
};

// Random sentence pairs over a small word list; lengths in [1, max_len].
inline PairData random_pairs(std::size_t count, std::size_t vocab, std::size_t max_len, int num_classes,
                             std::uint64_t seed) {
  static const std::vector<std::string> pool{"a",   "dog", "cat", "ran", "the", "big", "sat", "on",
                                             "mat", "red", "sun", "hot", "cold", "sky", "blue", "tree"};
  Rng rng(seed);
  PairData d;
  const std::size_t n = std::min(vocab, pool.size());
  auto sentence = [&] {
    std::vector<std::string> s(1 + uniform_index(rng, max_len));
    for (auto& t : s) t = pool[uniform_index(rng, n)];
    return s;
  };
  for (std::size_t i = 0; i < count; ++i) {
    text::SentencePair p;
    p.premise = sentence();
    p.hypothesis = sentence();
    p.label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(num_classes)));
    d.pairs.push_back(std::move(p));
  }
  d.words = text::Vocab::build_words(d.pairs);
  d.chars = text::Vocab::build_chars(d.pairs);
  return d;
}

}  // namespace drcn::test
