#include "drcn/train/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "drcn/core/errors.hpp"
#include "drcn/train/metrics.hpp"

namespace drcn::train {

namespace {

constexpr std::uint64_t kDropoutStream = 0x9E3779B97F4A7C15ULL;

struct Snapshot {
  std::vector<Tensor> params;
  ops::BatchNormStats bn;

  static Snapshot take(const model::DrcnModel& m) {
    Snapshot s;
    for (const auto& p : m.params().all()) s.params.push_back(p.var.value());
    s.bn = m.bn_stats();
    return s;
  }

  void restore(model::DrcnModel& m) const {
    const auto& all = m.params().all();
    for (std::size_t i = 0; i < all.size(); ++i) {
      Var v = all[i].var;
      v.mutable_value() = params[i];
    }
    m.bn_stats() = bn;
  }
};

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Trainer::Trainer(model::DrcnModel& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      lr_(config.lr),
      state_(make_optimizer_state(model.params())),
      dropout_rng_(config.seed ^ kDropoutStream) {
  config_.validate();
}

StepStats Trainer::step(const text::Batch& batch) {
  model_.params().zero_grads();
  Tape tape;
  model::ForwardOptions opt;
  opt.training = true;
  opt.rng = &dropout_rng_;
  auto result = model_.forward(tape, batch, opt);
  auto terms = model_.loss(tape, result, batch.labels);
  StepStats s;
  s.total = terms.total.value().item();
  s.xent = terms.xent;
  s.recon = terms.recon;
  if (!std::isfinite(s.total)) throw NumericError("non-finite training loss");
  tape.backward(terms.total);
  check_gradients(model_.params());
  s.grad_norm = clip_gradients(model_.params(), config_.clip_norm);
  rmsprop_step(model_.params(), state_, {lr_, config_.rho, config_.epsilon, config_.l2});
  return s;
}

TrainResult train(model::DrcnModel& model, const TrainData& data, const TrainConfig& config,
                  const EpochHook& on_epoch) {
  config.validate();
  if (data.train.empty()) throw EmptyDatasetError("training set is empty");
  if (data.dev.empty()) throw EmptyDatasetError("dev set is empty");
  const auto& mc = model.config();
  Trainer trainer(model, config);
  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  Snapshot best_state = Snapshot::take(model);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    text::BatchOptions opt;
    opt.batch_size = config.batch_size;
    opt.max_len = mc.max_len;
    opt.max_word_len = mc.max_word_len;
    opt.shuffle = true;
    opt.seed = config.seed + static_cast<std::uint64_t>(epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = trainer.lr();
    std::size_t seen = 0;
    bool budget_hit = false;
    for (const auto& batch : text::make_batches(data.train, data.words, data.chars, opt)) {
      const auto s = trainer.step(batch);
      rec.train_xent += s.xent * static_cast<double>(batch.size);
      rec.train_recon += s.recon * static_cast<double>(batch.size);
      seen += batch.size;
      ++result.steps;
      if (config.max_steps > 0 && result.steps >= config.max_steps) {
        budget_hit = true;
        break;
      }
    }
    rec.train_xent /= static_cast<double>(seen);
    rec.train_recon /= static_cast<double>(seen);
    rec.dev_acc = evaluate(model, data.dev, data.words, data.chars).accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const bool improved = rec.dev_acc > best;
    if (improved) {
      best = rec.dev_acc;
      result.best_epoch = epoch;
      best_state = Snapshot::take(model);
      stale = 0;
    } else {
      trainer.set_lr(trainer.lr() * config.decay);
      ++stale;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec, improved);
    if (budget_hit || (config.patience > 0 && stale >= config.patience)) break;
  }
  result.best_dev_acc = best;
  best_state.restore(model);
  return result;
}

void write_log_header(std::ostream& out) { out << "epoch,lr,train_xent,train_recon,dev_acc,seconds\n"; }

void write_log_row(std::ostream& out, const EpochRecord& r) {
  out << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.train_xent) << ','
      << format_double(r.train_recon) << ',' << format_double(r.dev_acc) << ',' << format_double(r.seconds) << '\n';
}

}  // namespace drcn::train
