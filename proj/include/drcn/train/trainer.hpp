#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "drcn/core/rng.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/text/batching.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/vocab.hpp"
#include "drcn/train/optimizer.hpp"
#include "drcn/train/train_config.hpp"

namespace drcn::train {

struct StepStats {
  double total = 0.0;
  double xent = 0.0;
  double recon = 0.0;
  double grad_norm = 0.0;  // before clipping
};

// Single-replica optimisation state: learning rate, RMSProp accumulators and
// the dropout stream.
class Trainer {
 public:
  Trainer(model::DrcnModel& model, const TrainConfig& config);

  // Forward, backward, clip, RMSProp update. Throws NumericError on a
  // non-finite loss or gradient.
  StepStats step(const text::Batch& batch);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  const OptimizerState& state() const { return state_; }

 private:
  model::DrcnModel& model_;
  TrainConfig config_;
  double lr_;
  OptimizerState state_;
  Rng dropout_rng_;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // rate used during the epoch
  double train_xent = 0.0;
  double train_recon = 0.0;
  double dev_acc = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_dev_acc = 0.0;
  int best_epoch = 0;
  std::size_t steps = 0;
};

struct TrainData {
  const std::vector<text::SentencePair>& train;
  const std::vector<text::SentencePair>& dev;
  const text::Vocab& words;
  const text::Vocab& chars;
};

// Called after each epoch; `improved` is true when the epoch set a new best.
using EpochHook = std::function<void(const EpochRecord&, bool improved)>;

// Epoch loop: shuffled batches, dev accuracy after every epoch, lr *= decay
// whenever dev accuracy does not strictly improve, early stop after
// `patience` such epochs in a row. The model ends holding the best-dev
// parameters.
TrainResult train(model::DrcnModel& model, const TrainData& data, const TrainConfig& config,
                  const EpochHook& on_epoch = {});

// Shortest text that reads back to the same double.
std::string format_double(double v);

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochRecord& r);

}  // namespace drcn::train
