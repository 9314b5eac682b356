#include "drcn/train/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "drcn/core/errors.hpp"
#include "drcn/core/rng.hpp"

namespace drcn::train {

namespace {

std::string word(std::size_t id) { return "w" + std::to_string(id); }

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

}  // namespace

std::vector<text::SentencePair> make_alignment_task(const AlignmentTaskOptions& o) {
  if (o.premise_min == 0 || o.premise_min > o.premise_max || o.hypothesis_min == 0 ||
      o.hypothesis_min > o.hypothesis_max || o.hypothesis_max > o.premise_min || o.vocab <= o.premise_max) {
    throw ArgumentError("alignment task: inconsistent lengths or vocabulary size");
  }
  Rng rng(o.seed);
  std::vector<std::size_t> ids(o.vocab);
  std::vector<text::SentencePair> pairs;
  pairs.reserve(o.pairs);
  for (std::size_t n = 0; n < o.pairs; ++n) {
    std::iota(ids.begin(), ids.end(), 0);
    shuffle(ids.begin(), ids.end(), rng);
    const std::size_t plen = between(rng, o.premise_min, o.premise_max);
    const std::size_t hlen = between(rng, o.hypothesis_min, o.hypothesis_max);

    std::vector<std::size_t> picked(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(plen));
    shuffle(picked.begin(), picked.end(), rng);
    picked.resize(hlen);

    text::SentencePair p;
    p.label = static_cast<int>(uniform_index(rng, 2));
    if (p.label == 0) {
      // ids[plen..] never occur in the premise.
      picked[uniform_index(rng, hlen)] = ids[plen + uniform_index(rng, o.vocab - plen)];
    }
    for (std::size_t i = 0; i < plen; ++i) p.premise.push_back(word(ids[i]));
    for (auto id : picked) p.hypothesis.push_back(word(id));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

DataSplit split_pairs(const std::vector<text::SentencePair>& pairs, std::size_t dev, std::size_t test) {
  if (dev + test >= pairs.size()) throw ArgumentError("split: dev and test leave no training pairs");
  const auto n_train = static_cast<std::ptrdiff_t>(pairs.size() - dev - test);
  const auto n_dev = static_cast<std::ptrdiff_t>(dev);
  DataSplit s;
  s.train.assign(pairs.begin(), pairs.begin() + n_train);
  s.dev.assign(pairs.begin() + n_train, pairs.begin() + n_train + n_dev);
  s.test.assign(pairs.begin() + n_train + n_dev, pairs.end());
  return s;
}

std::vector<text::SentencePair> random_pairs(std::size_t count, std::size_t vocab, std::size_t max_len,
                                             int num_classes, std::uint64_t seed) {
  if (vocab == 0 || max_len == 0 || num_classes < 2) throw ArgumentError("random pairs: empty vocabulary or length");
  Rng rng(seed);
  auto sentence = [&] {
    std::vector<std::string> s(between(rng, 1, max_len));
    for (auto& t : s) t = word(uniform_index(rng, vocab));
    return s;
  };
  std::vector<text::SentencePair> pairs(count);
  for (auto& p : pairs) {
    p.premise = sentence();
    p.hypothesis = sentence();
    p.label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(num_classes)));
  }
  return pairs;
}

}  // namespace drcn::train
