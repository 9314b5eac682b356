#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drcn/core/tensor.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::train {

// Candidates are ranked by descending score; equal scores keep their input
// order. Both return 0 when no candidate is relevant.
double average_precision(std::span<const double> scores, std::span<const int> relevant);
double reciprocal_rank(std::span<const double> scores, std::span<const int> relevant);

struct RankingMetrics {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t groups = 0;          // groups that entered the means
  std::size_t skipped_groups = 0;  // groups without a positive candidate
};

// Groups are formed by group id in order of first appearance. A label of 1
// marks a positive candidate.
RankingMetrics ranking_metrics(std::span<const double> scores, std::span<const int> labels,
                               std::span<const std::string> group_ids);

struct EvalReport {
  std::size_t examples = 0;
  double accuracy = 0.0;
  bool has_ranking = false;  // every pair carried a group id
  RankingMetrics ranking;
  std::vector<std::size_t> gold_counts;       // per class
  std::vector<std::size_t> predicted_counts;  // per class
  std::vector<std::size_t> correct_counts;    // per class
  double xent = 0.0;   // mean -log p(gold)
  double recon = 0.0;  // mean summed bottleneck loss per batch; 0 without bottlenecks
};

// Row-stochastic B x C probabilities for one batch.
using BatchScorer = std::function<Tensor(const text::Batch&)>;

// Builds the report from per-pair probabilities (N x C, rows in pair order).
// Ranking scores are the probability of class 1.
EvalReport report_from_probabilities(const Tensor& probabilities, const std::vector<text::SentencePair>& pairs,
                                     int num_classes);

// Eval-mode pass over `pairs`, batched in input order.
EvalReport evaluate(model::DrcnModel& model, const std::vector<text::SentencePair>& pairs,
                    const text::Vocab& words, const text::Vocab& chars, std::size_t batch_size = 64);

// Probabilities for every pair (N x C), batched in input order.
Tensor predict_all(const BatchScorer& scorer, const std::vector<text::SentencePair>& pairs,
                   const text::Vocab& words, const text::Vocab& chars, std::size_t max_len,
                   std::size_t max_word_len, std::size_t batch_size);

// Mean of the members' class probabilities. Members must agree on the class
// count (ConfigError otherwise) and at least one is required.
Tensor ensemble_predict(std::span<model::DrcnModel* const> members, const text::Batch& batch);

EvalReport evaluate_ensemble(std::span<model::DrcnModel* const> members,
                             const std::vector<text::SentencePair>& pairs, const text::Vocab& words,
                             const text::Vocab& chars, std::size_t batch_size = 64);

}  // namespace drcn::train
