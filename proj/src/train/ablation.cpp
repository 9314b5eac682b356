#include "drcn/train/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <ostream>
#include <sstream>
#include <thread>

#include "drcn/core/errors.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/train/metrics.hpp"
#include "drcn/train/trainer.hpp"

namespace drcn::train {

using model::ConnectionMode;

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{"full",          "no-ae",         "no-etr",   "no-efix",
                                              "no-dense-attn", "no-dense-rec",  "no-dense-both",
                                              "residual",      "residual-no-emb", "plain-attn", "plain-no-attn"};
  return names;
}

model::ModelConfig apply_variant(const model::ModelConfig& base, const std::string& name) {
  auto c = base;
  auto non_dense = [&](ConnectionMode mode) {
    c.connection_mode = mode;
    c.ae_after_layers = std::vector<int>{};
  };
  if (name == "full") {
  } else if (name == "no-ae") {
    c.ae_after_layers = std::vector<int>{};
  } else if (name == "no-etr") {
    c.use_trainable_emb = false;
  } else if (name == "no-efix") {
    c.use_fixed_emb = false;
  } else if (name == "no-dense-attn") {
    c.carry_attention = false;
  } else if (name == "no-dense-rec") {
    c.carry_recurrent = false;
  } else if (name == "no-dense-both") {
    c.carry_attention = false;
    c.carry_recurrent = false;
  } else if (name == "residual") {
    non_dense(ConnectionMode::kResidual);
    c.carry_embedding = true;
  } else if (name == "residual-no-emb") {
    non_dense(ConnectionMode::kResidual);
    c.carry_embedding = false;
  } else if (name == "plain-attn") {
    non_dense(ConnectionMode::kPlain);
    c.use_attention = true;
  } else if (name == "plain-no-attn") {
    non_dense(ConnectionMode::kPlain);
    c.use_attention = false;
  } else {
    throw ArgumentError("unknown ablation variant '" + name + "'");
  }
  c.validate();
  return c;
}

std::vector<std::string> parse_suite(const std::string& text) {
  if (text == "all") return ablation_variants();
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto& known = ablation_variants();
    if (std::find(known.begin(), known.end(), item) == known.end()) {
      throw ArgumentError("unknown ablation variant '" + item + "'");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ArgumentError("ablation suite is empty");
  return out;
}

std::vector<AblationJob> suite_jobs(const std::vector<std::string>& variants) {
  std::vector<AblationJob> jobs;
  for (const auto& v : variants) jobs.push_back({v, 0});
  return jobs;
}

std::vector<AblationJob> depth_sweep_jobs(const std::vector<std::string>& variants, int max_layers) {
  std::vector<AblationJob> jobs;
  for (const auto& v : variants) {
    for (int l = 1; l <= max_layers; ++l) jobs.push_back({v, l});
  }
  return jobs;
}

namespace {

AblationRow run_job(const AblationJob& job, const AblationSetup& setup) {
  const auto start = std::chrono::steady_clock::now();
  auto config = apply_variant(setup.base, job.variant);
  if (job.layers > 0) {
    config.num_layers = job.layers;
    config.validate();
  }
  model::DrcnModel m(config, setup.words.size(), setup.chars.size(), setup.model_seed);
  if (setup.embeddings) m.set_word_embeddings(*setup.embeddings);
  const auto result = train(m, {setup.data.train, setup.data.dev, setup.words, setup.chars}, setup.train);
  AblationRow row;
  row.variant = job.variant;
  row.layers = config.num_layers;
  row.dev_acc = result.best_dev_acc;
  row.accuracy = evaluate(m, setup.data.test, setup.words, setup.chars).accuracy;
  row.params = m.params().scalar_count(false);
  row.best_epoch = result.best_epoch;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::vector<AblationJob>& jobs, const AblationSetup& setup) {
  for (const auto& j : jobs) apply_variant(setup.base, j.variant);
  std::vector<AblationRow> rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        rows[i] = run_job(jobs[i], setup);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(setup.jobs, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,layers,dev_acc,accuracy,params\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.layers << ',' << format_double(r.dev_acc) << ',' << format_double(r.accuracy)
        << ',' << r.params << '\n';
  }
}

}  // namespace drcn::train
