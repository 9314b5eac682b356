#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drcn/core/tensor.hpp"
#include "drcn/model/config.hpp"
#include "drcn/text/vocab.hpp"
#include "drcn/train/synthetic.hpp"
#include "drcn/train/train_config.hpp"

namespace drcn::train {

// Ablation variants in table order:
//   full, no-ae, no-etr, no-efix, no-dense-attn, no-dense-rec, no-dense-both,
//   residual, residual-no-emb, plain-attn, plain-no-attn
const std::vector<std::string>& ablation_variants();

// Applies a variant's config delta to `base`. Throws ArgumentError for an
// unknown name.
model::ModelConfig apply_variant(const model::ModelConfig& base, const std::string& name);

// "all" or a comma-separated list of variant names. Throws ArgumentError for
// an empty suite or an unknown name.
std::vector<std::string> parse_suite(const std::string& text);

struct AblationJob {
  std::string variant;
  int layers = 0;  // 0 keeps the base depth
};

std::vector<AblationJob> suite_jobs(const std::vector<std::string>& variants);
std::vector<AblationJob> depth_sweep_jobs(const std::vector<std::string>& variants, int max_layers = 5);

struct AblationSetup {
  model::ModelConfig base;
  TrainConfig train;
  const DataSplit& data;
  const text::Vocab& words;
  const text::Vocab& chars;
  const Tensor* embeddings = nullptr;  // pretrained table; random init when null
  std::uint64_t model_seed = 1;
  unsigned jobs = 1;
};

struct AblationRow {
  std::string variant;
  int layers = 0;
  double dev_acc = 0.0;
  double accuracy = 0.0;  // on the test block
  std::size_t params = 0;  // non-embedding scalars
  int best_epoch = 0;
  double seconds = 0.0;
};

// Trains every job under the same seeds and budget; rows come back in job
// order regardless of how many worker threads ran them.
std::vector<AblationRow> run_ablation(const std::vector<AblationJob>& jobs, const AblationSetup& setup);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace drcn::train
