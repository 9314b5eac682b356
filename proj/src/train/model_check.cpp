#include "drcn/train/model_check.hpp"

#include <chrono>

#include "drcn/model/drcn_model.hpp"
#include "drcn/text/batching.hpp"
#include "drcn/text/vocab.hpp"
#include "drcn/train/synthetic.hpp"

namespace drcn::train {

ModelGradCheck model_grad_check(const model::ModelConfig& config, std::uint64_t seed, double h) {
  const auto start = std::chrono::steady_clock::now();
  const auto pairs = random_pairs(3, 8, config.max_len, config.num_classes, seed);
  const auto words = text::Vocab::build_words(pairs);
  const auto chars = text::Vocab::build_chars(pairs);
  model::DrcnModel m(config, words.size(), chars.size(), seed + 1);
  const auto batch = text::make_batch(pairs, words, chars, config.max_len, config.max_word_len);
  auto loss_fn = [&](Tape& tape) {
    Rng rng(seed + 2);
    model::ForwardOptions o;
    o.training = true;
    o.rng = &rng;
    auto r = m.forward(tape, batch, o);
    return m.loss(tape, r, batch.labels).total;
  };
  ModelGradCheck out;
  out.result = grad_check(loss_fn, m.params().trainable_vars(), h);
  std::size_t k = 0;
  for (const auto& p : m.params().all()) {
    if (!p.trainable) continue;
    if (k++ == out.result.worst_param) out.worst_name = p.name;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace drcn::train
