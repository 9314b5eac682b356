#include "drcn/text/batching.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "drcn/core/errors.hpp"
#include "drcn/core/rng.hpp"
#include "drcn/text/tokenizer.hpp"

namespace drcn::text {

std::vector<double> exact_match_flags(const std::vector<std::string>& p, const std::vector<std::string>& q) {
  std::unordered_set<std::string> other;
  for (const auto& t : q) other.insert(lowercase(t));
  std::vector<double> flags(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) flags[i] = other.count(lowercase(p[i])) ? 1.0 : 0.0;
  return flags;
}

namespace {

std::size_t word_length(const std::string& token, std::size_t max_word_len) {
  return std::min(utf8_chars(token).size(), max_word_len);
}

void fill_side(SideBatch& side, const std::vector<const std::vector<std::string>*>& sentences,
               const std::vector<const std::vector<std::string>*>& others, const Vocab& words, const Vocab& chars,
               std::size_t max_len, std::size_t word_len) {
  const std::size_t batch = sentences.size();
  std::size_t steps = 1;
  for (const auto* s : sentences) steps = std::max(steps, std::min(s->size(), max_len));
  side.steps = steps;
  side.ids.assign(batch * steps, Vocab::kPad);
  side.chars.assign(batch * steps * word_len, Vocab::kPad);
  side.flags = Tensor(Shape{batch * steps, 1}, 0.0);
  side.mask = Tensor(Shape{batch, steps}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& sentence = *sentences[b];
    const std::size_t len = std::min(sentence.size(), max_len);
    // Flags are computed against the full other sentence, before truncation.
    const auto flags = exact_match_flags(sentence, *others[b]);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = b * steps + t;
      side.ids[row] = words.id(sentence[t]);
      side.flags.at(row, 0) = flags[t];
      side.mask.at(b, t) = 1.0;
      const auto cps = utf8_chars(sentence[t]);
      const std::size_t n = std::min(cps.size(), word_len);
      for (std::size_t k = 0; k < n; ++k) side.chars[row * word_len + k] = chars.id(cps[k]);
    }
  }
}

}  // namespace

Batch make_batch(const std::vector<SentencePair>& pairs, const Vocab& words, const Vocab& chars,
                 std::size_t max_len, std::size_t max_word_len) {
  BatchOptions options;
  options.batch_size = std::max<std::size_t>(pairs.size(), 1);
  options.max_len = max_len;
  options.max_word_len = max_word_len;
  options.shuffle = false;
  auto batches = make_batches(pairs, words, chars, options);
  return std::move(batches.front());
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs, const Vocab& words, const Vocab& chars,
                                const BatchOptions& options) {
  if (pairs.empty()) throw EmptyDatasetError("cannot batch an empty dataset");
  if (options.batch_size == 0) throw ArgumentError("batch size must be positive");
  if (options.max_len == 0 || options.max_word_len == 0) throw ArgumentError("length limits must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  if (options.shuffle) {
    Rng rng(options.seed);
    shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
    const std::size_t end = std::min(order.size(), start + options.batch_size);
    Batch batch;
    batch.size = end - start;
    std::vector<const std::vector<std::string>*> ps, qs;
    std::size_t word_len = 1;
    for (std::size_t i = start; i < end; ++i) {
      const auto& pair = pairs[order[i]];
      batch.indices.push_back(order[i]);
      batch.labels.push_back(pair.label);
      batch.group_ids.push_back(pair.group_id);
      ps.push_back(&pair.premise);
      qs.push_back(&pair.hypothesis);
      for (const auto* side : {&pair.premise, &pair.hypothesis}) {
        const std::size_t len = std::min(side->size(), options.max_len);
        for (std::size_t t = 0; t < len; ++t) {
          word_len = std::max(word_len, word_length((*side)[t], options.max_word_len));
        }
      }
    }
    batch.word_len = word_len;
    fill_side(batch.premise, ps, qs, words, chars, options.max_len, word_len);
    fill_side(batch.hypothesis, qs, ps, words, chars, options.max_len, word_len);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace drcn::text
