#include "drcn/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_map>

#include "drcn/core/errors.hpp"
#include "drcn/text/batching.hpp"

namespace drcn::train {

namespace {

std::vector<std::size_t> ranking_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

void check_lengths(std::span<const double> scores, std::span<const int> relevant) {
  if (scores.size() != relevant.size()) {
    throw DimensionError("ranking: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(relevant.size()) + " labels");
  }
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> relevant) {
  check_lengths(scores, relevant);
  double sum = 0.0;
  std::size_t hits = 0;
  const auto order = ranking_order(scores);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[order[rank]] != 1) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double reciprocal_rank(std::span<const double> scores, std::span<const int> relevant) {
  check_lengths(scores, relevant);
  const auto order = ranking_order(scores);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[order[rank]] == 1) return 1.0 / static_cast<double>(rank + 1);
  }
  return 0.0;
}

RankingMetrics ranking_metrics(std::span<const double> scores, std::span<const int> labels,
                               std::span<const std::string> group_ids) {
  check_lengths(scores, labels);
  if (group_ids.size() != scores.size()) throw DimensionError("ranking: group ids do not match scores");
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_ids.size(); ++i) {
    auto [it, added] = slot.emplace(group_ids[i], groups.size());
    if (added) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  RankingMetrics m;
  for (const auto& members : groups) {
    std::vector<double> s;
    std::vector<int> r;
    for (auto i : members) {
      s.push_back(scores[i]);
      r.push_back(labels[i]);
    }
    if (std::find(r.begin(), r.end(), 1) == r.end()) {
      ++m.skipped_groups;
      continue;
    }
    m.map += average_precision(s, r);
    m.mrr += reciprocal_rank(s, r);
    ++m.groups;
  }
  if (m.groups > 0) {
    m.map /= static_cast<double>(m.groups);
    m.mrr /= static_cast<double>(m.groups);
  }
  if (m.skipped_groups > 0) {
    std::cerr << "warning: " << m.skipped_groups << " group(s) without a positive candidate excluded from MAP/MRR\n";
  }
  return m;
}

EvalReport report_from_probabilities(const Tensor& probabilities, const std::vector<text::SentencePair>& pairs,
                                     int num_classes) {
  const auto classes = static_cast<std::size_t>(num_classes);
  if (probabilities.rows() != pairs.size() || probabilities.cols() != classes) {
    throw DimensionError("evaluate: probabilities " + shape_to_string(probabilities.shape()) + " for " +
                         std::to_string(pairs.size()) + " pairs and " + std::to_string(classes) + " classes");
  }
  EvalReport rep;
  rep.examples = pairs.size();
  rep.gold_counts.assign(classes, 0);
  rep.predicted_counts.assign(classes, 0);
  rep.correct_counts.assign(classes, 0);
  std::size_t correct = 0;
  bool grouped = !pairs.empty();
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double* row = probabilities.data() + i * classes;
    const auto pred = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
    const auto gold = static_cast<std::size_t>(pairs[i].label);
    ++rep.gold_counts.at(gold);
    ++rep.predicted_counts[pred];
    if (pred == gold) {
      ++rep.correct_counts[gold];
      ++correct;
    }
    rep.xent -= std::log(std::max(row[gold], 1e-300));
    if (pairs[i].group_id.empty()) grouped = false;
    scores.push_back(classes > 1 ? row[1] : row[0]);
    labels.push_back(pairs[i].label);
    groups.push_back(pairs[i].group_id);
  }
  if (!pairs.empty()) {
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
    rep.xent /= static_cast<double>(pairs.size());
  }
  if (grouped && classes == 2) {
    rep.has_ranking = true;
    rep.ranking = ranking_metrics(scores, labels, groups);
  }
  return rep;
}

Tensor predict_all(const BatchScorer& scorer, const std::vector<text::SentencePair>& pairs,
                   const text::Vocab& words, const text::Vocab& chars, std::size_t max_len,
                   std::size_t max_word_len, std::size_t batch_size) {
  text::BatchOptions opt;
  opt.batch_size = batch_size;
  opt.max_len = max_len;
  opt.max_word_len = max_word_len;
  opt.shuffle = false;
  Tensor out;
  std::size_t row = 0;
  for (const auto& batch : text::make_batches(pairs, words, chars, opt)) {
    const Tensor probs = scorer(batch);
    if (out.empty()) out = Tensor({pairs.size(), probs.cols()});
    std::copy(probs.values().begin(), probs.values().end(), out.data() + row * probs.cols());
    row += batch.size;
  }
  return out;
}

EvalReport evaluate(model::DrcnModel& model, const std::vector<text::SentencePair>& pairs,
                    const text::Vocab& words, const text::Vocab& chars, std::size_t batch_size) {
  const auto& c = model.config();
  double recon = 0.0;
  std::size_t batches = 0;
  auto scorer = [&](const text::Batch& batch) {
    Tape tape(false);
    auto r = model.forward(tape, batch, {});
    if (r.recon.defined()) recon += r.recon.value().item();
    ++batches;
    return r.probabilities;
  };
  const Tensor probs = predict_all(scorer, pairs, words, chars, c.max_len, c.max_word_len, batch_size);
  auto rep = report_from_probabilities(probs, pairs, c.num_classes);
  if (batches > 0) rep.recon = recon / static_cast<double>(batches);
  return rep;
}

Tensor ensemble_predict(std::span<model::DrcnModel* const> members, const text::Batch& batch) {
  if (members.empty()) throw ConfigError("ensemble: no members");
  const int classes = members.front()->config().num_classes;
  Tensor mean;
  for (auto* m : members) {
    if (m->config().num_classes != classes) {
      throw ConfigError("ensemble: members disagree on the class count (" + std::to_string(classes) + " vs " +
                        std::to_string(m->config().num_classes) + ")");
    }
    const Tensor p = m->predict(batch);
    if (mean.empty()) {
      mean = p;
    } else {
      mean.add_in_place(p);
    }
  }
  mean.scale_in_place(1.0 / static_cast<double>(members.size()));
  return mean;
}

EvalReport evaluate_ensemble(std::span<model::DrcnModel* const> members,
                             const std::vector<text::SentencePair>& pairs, const text::Vocab& words,
                             const text::Vocab& chars, std::size_t batch_size) {
  if (members.empty()) throw ConfigError("ensemble: no members");
  const auto& c = members.front()->config();
  double recon = 0.0;
  std::size_t batches = 0;
  // Same mean as ensemble_predict, with the members' reconstruction losses
  // averaged alongside.
  auto scorer = [&](const text::Batch& batch) {
    Tensor mean;
    double batch_recon = 0.0;
    for (auto* m : members) {
      if (m->config().num_classes != c.num_classes) throw ConfigError("ensemble: members disagree on the class count");
      Tape tape(false);
      auto r = m->forward(tape, batch, {});
      if (r.recon.defined()) batch_recon += r.recon.value().item();
      if (mean.empty()) {
        mean = r.probabilities;
      } else {
        mean.add_in_place(r.probabilities);
      }
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    mean.scale_in_place(inv);
    recon += batch_recon * inv;
    ++batches;
    return mean;
  };
  const Tensor probs = predict_all(scorer, pairs, words, chars, c.max_len, c.max_word_len, batch_size);
  auto rep = report_from_probabilities(probs, pairs, c.num_classes);
  if (batches > 0) rep.recon = recon / static_cast<double>(batches);
  return rep;
}

}  // namespace drcn::train
