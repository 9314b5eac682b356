#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "drcn/core/errors.hpp"
#include "drcn/model/checkpoint.hpp"
#include "drcn/train/ablation.hpp"
#include "drcn/train/metrics.hpp"
#include "drcn/train/optimizer.hpp"
#include "drcn/train/synthetic.hpp"
#include "drcn/train/trainer.hpp"
#include "model_fixtures.hpp"

namespace drcn::train {
namespace {

using model::DrcnModel;
using model::preset;

TEST(RmsPropTest, ZeroGradientLeavesParametersUnchanged) {
  Tensor theta = Tensor::vector({1.0, -2.0, 3.0});
  Tensor acc({3});
  rmsprop_update(theta, Tensor({3}), acc, {0.001, 0.9, 1e-8, 0.0});
  EXPECT_EQ(theta, Tensor::vector({1.0, -2.0, 3.0}));
  EXPECT_EQ(acc, Tensor({3}));
}

TEST(RmsPropTest, ScalarStepMatchesHandComputation) {
  Tensor theta = Tensor::vector({1.0});
  Tensor acc({1});
  rmsprop_update(theta, Tensor::vector({1.0}), acc, {0.001, 0.9, 1e-8, 0.0});
  EXPECT_NEAR(acc[0], 0.1, 1e-16);
  EXPECT_NEAR(theta[0], 1.0 - 0.001 / (std::sqrt(0.1) + 1e-8), 1e-15);
}

TEST(RmsPropTest, WeightDecaySkipsEmbeddingTables) {
  auto data = test::random_pairs(2, 10, 3, 3, 5);
  DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 3);
  auto before_emb = m.params().var("emb.trainable").value();
  auto before_fc = m.params().var("fc1.w").value();
  m.params().zero_grads();
  auto state = make_optimizer_state(m.params());
  rmsprop_step(m.params(), state, {0.001, 0.9, 1e-8, 1e-6});
  EXPECT_EQ(m.params().var("emb.trainable").value(), before_emb);
  EXPECT_NE(m.params().var("fc1.w").value(), before_fc);
  EXPECT_EQ(state.steps, 1u);
}

TEST(RmsPropTest, NonFiniteGradientIsReported) {
  auto data = test::random_pairs(2, 10, 3, 3, 5);
  DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 3);
  m.params().zero_grads();
  Var w = m.params().var("out.b");
  w.grad()[0] = std::nan("");
  try {
    check_gradients(m.params());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("out.b"), std::string::npos);
  }
}

TEST(RmsPropTest, ClipBoundsGlobalNorm) {
  auto data = test::random_pairs(2, 10, 3, 3, 5);
  DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 3);
  m.params().zero_grads();
  Var b = m.params().var("out.b");
  b.grad()[0] = 30.0;
  b.grad()[1] = 40.0;
  EXPECT_DOUBLE_EQ(clip_gradients(m.params(), 5.0), 50.0);
  EXPECT_NEAR(b.grad()[0], 3.0, 1e-12);
  EXPECT_NEAR(b.grad()[1], 4.0, 1e-12);
}

TEST(TrainConfigTest, KeysRoundTripAndUnknownKeysFail) {
  TrainConfig c;
  c.lr = 0.0025;
  c.seed = 77;
  TrainConfig d;
  for (const auto& [k, v] : c.to_key_values()) d.set(k, v);
  EXPECT_EQ(d.to_key_values(), c.to_key_values());
  EXPECT_THROW(d.set("learning_rate", "1"), ConfigError);
  d.decay = 1.5;
  EXPECT_THROW(d.validate(), ConfigError);
}

double batch_loss(DrcnModel& m, const text::Batch& batch) {
  Tape tape(false);
  Rng rng(0);
  model::ForwardOptions o;
  o.training = true;
  o.rng = &rng;
  auto r = m.forward(tape, batch, o);
  return m.loss(tape, r, batch.labels).total.value().item();
}

model::ModelConfig deterministic_micro() {
  auto c = preset("micro");
  c.embed_keep = c.fc_keep = c.ae_keep = 1.0;
  return c;
}

TEST(TrainerTest, SmallStepDecreasesLoss) {
  auto data = test::random_pairs(4, 12, 3, 3, 17);
  DrcnModel m(deterministic_micro(), data.words.size(), data.chars.size(), 4);
  const auto batch = text::make_batch(data.pairs, data.words, data.chars, 3);
  TrainConfig tc;
  tc.lr = 1e-5;
  tc.l2 = 0.0;
  Trainer t(m, tc);
  const double before = batch_loss(m, batch);
  t.step(batch);
  EXPECT_LT(batch_loss(m, batch), before);
}

TEST(TrainerTest, LearningRateDecaysOnPlateau) {
  auto data = test::random_pairs(6, 12, 3, 2, 23);
  // Two copies of one pair with different labels: dev accuracy is 0.5 forever.
  std::vector<text::SentencePair> dev(2, data.pairs[0]);
  dev[0].label = 0;
  dev[1].label = 1;
  auto c = preset("micro");
  c.num_classes = 2;
  DrcnModel m(c, data.words.size(), data.chars.size(), 4);
  TrainConfig tc;
  tc.epochs = 4;
  tc.patience = 0;
  const auto r = train(m, {data.pairs, dev, data.words, data.chars}, tc);
  ASSERT_EQ(r.log.size(), 4u);
  EXPECT_DOUBLE_EQ(r.log[0].lr, 0.001);
  EXPECT_DOUBLE_EQ(r.log[1].lr, 0.001);
  EXPECT_DOUBLE_EQ(r.log[2].lr, 0.00085);
  EXPECT_DOUBLE_EQ(r.log[3].lr, 0.0007225);
  EXPECT_EQ(r.best_epoch, 1);
  for (const auto& e : r.log) EXPECT_DOUBLE_EQ(e.dev_acc, 0.5);

  DrcnModel again(c, data.words.size(), data.chars.size(), 4);
  tc.patience = 2;
  EXPECT_EQ(train(again, {data.pairs, dev, data.words, data.chars}, tc).log.size(), 3u);
}

TEST(TrainerTest, RestoresBestDevParameters) {
  auto data = test::random_pairs(8, 12, 3, 3, 29);
  DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 4);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  std::string best_bytes;
  const auto r = train(m, {data.pairs, data.pairs, data.words, data.chars}, tc,
                       [&](const EpochRecord&, bool improved) {
                         if (!improved) return;
                         std::ostringstream out;
                         model::write_checkpoint(out, m, data.words, data.chars);
                         best_bytes = out.str();
                       });
  std::ostringstream out;
  model::write_checkpoint(out, m, data.words, data.chars);
  EXPECT_EQ(out.str(), best_bytes);
  EXPECT_DOUBLE_EQ(evaluate(m, data.pairs, data.words, data.chars).accuracy, r.best_dev_acc);
}

TEST(TrainerTest, SameSeedGivesIdenticalRuns) {
  auto data = test::random_pairs(10, 12, 3, 3, 31);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  auto run = [&](std::string& bytes) {
    DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 4);
    auto r = train(m, {data.pairs, data.pairs, data.words, data.chars}, tc);
    std::ostringstream out;
    model::write_checkpoint(out, m, data.words, data.chars);
    bytes = out.str();
    return r;
  };
  std::string a, b;
  const auto ra = run(a);
  const auto rb = run(b);
  EXPECT_EQ(a, b);
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].lr, rb.log[i].lr);
    EXPECT_EQ(ra.log[i].train_xent, rb.log[i].train_xent);
    EXPECT_EQ(ra.log[i].train_recon, rb.log[i].train_recon);
    EXPECT_EQ(ra.log[i].dev_acc, rb.log[i].dev_acc);
  }
}

TEST(TrainerTest, LogCsvHasHeaderAndColumns) {
  std::ostringstream out;
  write_log_header(out);
  write_log_row(out, {2, 0.00085, 0.5, 0.25, 0.75, 1.5});
  EXPECT_EQ(out.str(), "epoch,lr,train_xent,train_recon,dev_acc,seconds\n2,0.00085,0.5,0.25,0.75,1.5\n");
}

// Independent formulation: rank of i = 1 + #{j ahead of i}, precision at a
// positive's rank = positives at or ahead of it / rank. Terms are summed in
// rank order so the floating-point result can be compared exactly.
struct Oracle {
  double ap = 0.0, rr = 0.0;
};

Oracle brute_force(const std::vector<double>& s, const std::vector<int>& rel) {
  auto ahead = [&](std::size_t j, std::size_t i) { return s[j] > s[i] || (s[j] == s[i] && j < i); };
  std::vector<std::pair<std::size_t, std::size_t>> terms;  // (rank, positives at or above)
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (rel[i] != 1) continue;
    std::size_t rank = 1, pos_at_or_above = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i || !ahead(j, i)) continue;
      ++rank;
      if (rel[j] == 1) ++pos_at_or_above;
    }
    terms.emplace_back(rank, pos_at_or_above);
  }
  Oracle o;
  if (terms.empty()) return o;
  std::sort(terms.begin(), terms.end());
  for (const auto& [rank, hits] : terms) o.ap += static_cast<double>(hits) / static_cast<double>(rank);
  o.ap /= static_cast<double>(terms.size());
  o.rr = 1.0 / static_cast<double>(terms.front().first);
  return o;
}

TEST(MetricsTest, HandExamples) {
  const std::vector<double> s1{0.9, 0.1};
  const std::vector<int> r1{1, 0};
  EXPECT_EQ(average_precision(s1, r1), 1.0);
  EXPECT_EQ(reciprocal_rank(s1, r1), 1.0);
  const std::vector<double> s2{0.2, 0.5, 0.9};
  const std::vector<int> r2{0, 1, 0};
  EXPECT_EQ(average_precision(s2, r2), 0.5);
  EXPECT_EQ(reciprocal_rank(s2, r2), 0.5);
  // Ties keep input order.
  const std::vector<double> s3{0.5, 0.5};
  EXPECT_EQ(reciprocal_rank(s3, std::vector<int>{0, 1}), 0.5);
  EXPECT_EQ(reciprocal_rank(s3, std::vector<int>{1, 0}), 1.0);
}

TEST(MetricsTest, FiftyRandomGroupsMatchBruteForceExactly) {
  Rng rng(8);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> groups;
  double map = 0.0, mrr = 0.0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = 2 + uniform_index(rng, 9);
    std::vector<double> s(n);
    std::vector<int> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 5)) / 4.0;  // frequent ties
      r[i] = static_cast<int>(uniform_index(rng, 2));
    }
    r[uniform_index(rng, n)] = 1;
    const auto o = brute_force(s, r);
    EXPECT_EQ(average_precision(s, r), o.ap) << "group " << g;
    EXPECT_EQ(reciprocal_rank(s, r), o.rr) << "group " << g;
    map += o.ap;
    mrr += o.rr;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(s[i]);
      labels.push_back(r[i]);
      groups.push_back("q" + std::to_string(g));
    }
  }
  const auto m = ranking_metrics(scores, labels, groups);
  EXPECT_EQ(m.groups, 50u);
  EXPECT_NEAR(m.map, map / 50.0, 1e-15);
  EXPECT_NEAR(m.mrr, mrr / 50.0, 1e-15);
}

TEST(MetricsTest, GroupsWithoutPositivesAreSkipped) {
  const std::vector<double> s{0.9, 0.1, 0.3, 0.7};
  const std::vector<int> r{0, 1, 0, 0};
  const std::vector<std::string> g{"a", "a", "b", "b"};
  const auto m = ranking_metrics(s, r, g);
  EXPECT_EQ(m.groups, 1u);
  EXPECT_EQ(m.skipped_groups, 1u);
  EXPECT_EQ(m.map, 0.5);
  EXPECT_EQ(m.mrr, 0.5);
}

TEST(MetricsTest, ReportCountsPerClass) {
  std::vector<text::SentencePair> pairs(4);
  const std::vector<int> gold{0, 1, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    pairs[i].label = gold[i];
    pairs[i].group_id = i < 2 ? "x" : "y";
  }
  const Tensor probs({4, 2}, {0.8, 0.2, 0.3, 0.7, 0.6, 0.4, 0.1, 0.9});
  const auto rep = report_from_probabilities(probs, pairs, 2);
  EXPECT_EQ(rep.accuracy, 0.5);
  EXPECT_EQ(rep.gold_counts, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(rep.predicted_counts, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(rep.correct_counts, (std::vector<std::size_t>{1, 1}));
  EXPECT_NEAR(rep.xent, -(std::log(0.8) + std::log(0.7) + std::log(0.4) + std::log(0.1)) / 4, 1e-15);
  ASSERT_TRUE(rep.has_ranking);
  EXPECT_EQ(rep.ranking.map, 0.75);  // group x: AP 1; group y: positive ranked 2nd
  EXPECT_EQ(rep.ranking.mrr, 0.75);
}

TEST(EnsembleTest, IdenticalMembersMatchSingleModel) {
  auto data = test::random_pairs(6, 12, 3, 3, 37);
  DrcnModel m(preset("micro"), data.words.size(), data.chars.size(), 4);
  const auto batch = text::make_batch(data.pairs, data.words, data.chars, 3);
  std::vector<DrcnModel*> members(8, &m);
  const Tensor single = m.predict(batch);
  const Tensor mean = ensemble_predict(members, batch);
  for (std::size_t i = 0; i < single.size(); ++i) EXPECT_NEAR(mean[i], single[i], 1e-15);
}

TEST(EnsembleTest, OpposedMembersAverageToHalf) {
  auto data = test::random_pairs(3, 12, 3, 2, 41);
  auto c = preset("micro");
  c.num_classes = 2;
  DrcnModel a(c, data.words.size(), data.chars.size(), 1);
  DrcnModel b(c, data.words.size(), data.chars.size(), 2);
  for (auto* m : {&a, &b}) {
    Var w = m->params().var("out.w");
    w.mutable_value().fill(0.0);
  }
  Var ba = a.params().var("out.b");
  Var bb = b.params().var("out.b");
  ba.mutable_value() = Tensor::vector({50.0, -50.0});
  bb.mutable_value() = Tensor::vector({-50.0, 50.0});
  const auto batch = text::make_batch(data.pairs, data.words, data.chars, 3);
  std::vector<DrcnModel*> members{&a, &b};
  const Tensor mean = ensemble_predict(members, batch);
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(mean[i], 0.5, 1e-15);
}

TEST(EnsembleTest, ArgmaxMatchesBruteForceOverMembers) {
  auto data = test::random_pairs(12, 12, 3, 3, 43);
  std::vector<std::unique_ptr<DrcnModel>> owned;
  std::vector<DrcnModel*> members;
  for (int s = 0; s < 5; ++s) {
    owned.push_back(std::make_unique<DrcnModel>(preset("micro"), data.words.size(), data.chars.size(), 100 + s));
    members.push_back(owned.back().get());
  }
  const auto batch = text::make_batch(data.pairs, data.words, data.chars, 3);
  const Tensor mean = ensemble_predict(members, batch);
  std::vector<Tensor> each;
  for (auto* m : members) each.push_back(m->predict(batch));
  for (std::size_t r = 0; r < batch.size; ++r) {
    std::size_t best = 0, arg = 0;
    double best_sum = -1.0;
    for (std::size_t k = 0; k < 3; ++k) {
      double sum = 0.0;
      for (const auto& p : each) sum += p.at(r, k);
      if (sum > best_sum) {
        best_sum = sum;
        best = k;
      }
      if (mean.at(r, k) > mean.at(r, arg)) arg = k;
    }
    EXPECT_EQ(arg, best) << "row " << r;
  }
}

TEST(EnsembleTest, ClassCountMismatchIsConfigError) {
  auto data = test::random_pairs(3, 12, 3, 2, 47);
  auto c2 = preset("micro");
  c2.num_classes = 2;
  DrcnModel a(preset("micro"), data.words.size(), data.chars.size(), 1);
  DrcnModel b(c2, data.words.size(), data.chars.size(), 1);
  const auto batch = text::make_batch(data.pairs, data.words, data.chars, 3);
  std::vector<DrcnModel*> members{&a, &b};
  EXPECT_THROW(ensemble_predict(members, batch), ConfigError);
  EXPECT_THROW(ensemble_predict(std::span<DrcnModel* const>{}, batch), ConfigError);
}

TEST(AblationTest, AllElevenVariantsAreConstructible) {
  const auto base = preset("paper-snli");
  ASSERT_EQ(ablation_variants().size(), 11u);
  for (const auto& v : ablation_variants()) {
    const auto c = apply_variant(base, v);
    EXPECT_NO_THROW(model::layer_widths(c)) << v;
  }
  EXPECT_EQ(apply_variant(base, "full"), base);
  EXPECT_TRUE(apply_variant(base, "no-ae").bottleneck_layers().empty());
  EXPECT_TRUE(apply_variant(base, "residual").bottleneck_layers().empty());
  EXPECT_FALSE(apply_variant(base, "plain-no-attn").use_attention);
  EXPECT_FALSE(apply_variant(base, "residual-no-emb").carry_embedding);
}

TEST(AblationTest, SuiteParsing) {
  EXPECT_EQ(parse_suite("all").size(), 11u);
  EXPECT_EQ(parse_suite("full,plain-attn"), (std::vector<std::string>{"full", "plain-attn"}));
  EXPECT_THROW(parse_suite(""), ArgumentError);
  EXPECT_THROW(parse_suite("full,deep"), ArgumentError);
  EXPECT_THROW(apply_variant(preset("micro"), "bogus"), ArgumentError);
  const auto sweep = depth_sweep_jobs({"plain-no-attn"});
  ASSERT_EQ(sweep.size(), 5u);
  EXPECT_EQ(sweep.front().layers, 1);
  EXPECT_EQ(sweep.back().layers, 5);
}

TEST(AblationTest, ParallelRunMatchesSequential) {
  auto pairs = random_pairs(24, 8, 3, 3, 53);
  auto split = split_pairs(pairs, 4, 4);
  const auto words = text::Vocab::build_words(split.train);
  const auto chars = text::Vocab::build_chars(split.train);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  AblationSetup setup{preset("micro"), tc, split, words, chars};
  const auto jobs = suite_jobs({"full", "plain-attn", "residual"});
  const auto seq = run_ablation(jobs, setup);
  setup.jobs = 3;
  const auto par = run_ablation(jobs, setup);
  ASSERT_EQ(seq.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(seq[i].variant, jobs[i].variant);
    EXPECT_EQ(par[i].variant, seq[i].variant);
    EXPECT_EQ(par[i].dev_acc, seq[i].dev_acc);
    EXPECT_EQ(par[i].accuracy, seq[i].accuracy);
    EXPECT_EQ(par[i].params, seq[i].params);
  }
  std::ostringstream csv;
  write_ablation_csv(csv, seq);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "variant,layers,dev_acc,accuracy,params");
}

TEST(SyntheticTest, AlignmentLabelsFollowTheConstruction) {
  AlignmentTaskOptions o;
  o.pairs = 2000;
  const auto pairs = make_alignment_task(o);
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    const std::set<std::string> prem(p.premise.begin(), p.premise.end());
    EXPECT_EQ(prem.size(), p.premise.size());
    EXPECT_GE(p.premise.size(), o.premise_min);
    EXPECT_LE(p.premise.size(), o.premise_max);
    EXPECT_GE(p.hypothesis.size(), o.hypothesis_min);
    EXPECT_LE(p.hypothesis.size(), o.hypothesis_max);
    const auto missing = std::count_if(p.hypothesis.begin(), p.hypothesis.end(),
                                       [&](const std::string& t) { return !prem.count(t); });
    EXPECT_EQ(missing, p.label == 1 ? 0 : 1);
    positives += static_cast<std::size_t>(p.label);
  }
  EXPECT_NEAR(static_cast<double>(positives) / 2000.0, 0.5, 0.05);
  EXPECT_EQ(make_alignment_task(o).front().premise, pairs.front().premise);
}

TEST(SyntheticTest, SplitIsContiguous) {
  const auto pairs = random_pairs(10, 5, 4, 2, 3);
  const auto s = split_pairs(pairs, 2, 3);
  EXPECT_EQ(s.train.size(), 5u);
  EXPECT_EQ(s.dev.front().premise, pairs[5].premise);
  EXPECT_EQ(s.test.back().premise, pairs[9].premise);
  EXPECT_THROW(split_pairs(pairs, 5, 5), ArgumentError);
}

}  // namespace
}  // namespace drcn::train
