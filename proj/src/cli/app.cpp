#include "drcn/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "drcn/cli/run_config.hpp"
#include "drcn/core/errors.hpp"
#include "drcn/core/ops.hpp"
#include "drcn/model/checkpoint.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/embeddings.hpp"
#include "drcn/text/tokenizer.hpp"
#include "drcn/train/ablation.hpp"
#include "drcn/train/metrics.hpp"
#include "drcn/train/model_check.hpp"
#include "drcn/train/synthetic.hpp"
#include "drcn/train/trainer.hpp"
#include "drcn/train/visualize.hpp"

namespace drcn::cli {

namespace fs = std::filesystem;

namespace {

// Carries an exit code out of a command.
struct Failure {
  int code;
  std::string message;
};

constexpr double kGradThreshold = 1e-4;

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("DRCN_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == std::string(s).size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("DRCN_SEED is not an integer: '") + s + "'");
}

// --seed, then a seed set in the run file, then DRCN_SEED, then the default.
void resolve_seed(RunConfig& rc, const std::optional<std::uint64_t>& flag) {
  if (flag) {
    rc.train.seed = *flag;
  } else if (!rc.seed_set) {
    if (auto e = env_seed()) rc.train.seed = *e;
  }
}

struct RunOptions {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_run_options(CLI::App* cmd, RunOptions& o, const std::string& default_preset) {
  cmd->add_option("--config", o.config_file, "Run config file (key=value)");
  cmd->add_option("--preset", o.preset, "Preset: paper-snli, paper-quora, paper-trecqa, micro, synthetic")
      ->default_str(default_preset);
  cmd->add_option("--set", o.overrides, "Override one key (key=value); repeatable");
  cmd->add_option("--seed", o.seed, "Random seed (falls back to DRCN_SEED)");
}

RunConfig resolve_run_config(const RunOptions& o, const std::string& default_preset) {
  RunConfig rc;
  if (!o.config_file.empty()) {
    try {
      rc = load_run_config(o.config_file);
    } catch (const IoError& e) {
      throw Failure{kExitConfig, e.what()};
    }
    if (!o.preset.empty()) rc.set("preset", o.preset);
  } else {
    rc = preset_run_config(o.preset.empty() ? default_preset : o.preset);
  }
  for (const auto& kv : o.overrides) rc.apply(kv);
  resolve_seed(rc, o.seed);
  rc.model.validate();
  rc.train.validate();
  return rc;
}

std::vector<text::SentencePair> load_data(const std::string& path, int num_classes, const char* what) {
  if (path.empty()) throw Failure{kExitConfig, std::string("no ") + what + " data given"};
  try {
    auto r = text::load_pairs(path, num_classes);
    if (r.skipped > 0) std::cerr << path << ": skipped " << r.skipped << " row(s)\n";
    return std::move(r.pairs);
  } catch (const Error& e) {
    throw Failure{kExitData, e.what()};
  }
}

model::LoadedModel load_model(const std::string& path) {
  try {
    return model::load_checkpoint(path);
  } catch (const Error& e) {
    throw Failure{kExitConfig, e.what()};
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitData, "cannot create directory " + dir + ": " + ec.message()};
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Failure{kExitData, "cannot write " + p.string()};
  return out;
}

void print_config(std::ostream& out, const RunConfig& rc) { rc.write(out); }

// ---- train -------------------------------------------------------------

struct TrainArgs {
  RunOptions run;
  std::string train_path, dev_path, out_dir, embeddings;
  bool store_f32 = false;
};

int cmd_train(const TrainArgs& a) {
  auto rc = resolve_run_config(a.run, "paper-snli");
  if (!a.train_path.empty()) rc.paths["train"] = a.train_path;
  if (!a.dev_path.empty()) rc.paths["dev"] = a.dev_path;
  if (!a.embeddings.empty()) rc.paths["embeddings"] = a.embeddings;
  const auto& mc = rc.model;
  const auto train_pairs = load_data(rc.path("train"), mc.num_classes, "training");
  const auto dev_pairs = load_data(rc.path("dev"), mc.num_classes, "dev");
  const auto words = text::Vocab::build_words(train_pairs);
  const auto chars = text::Vocab::build_chars(train_pairs);

  model::DrcnModel m(mc, words.size(), chars.size(), rc.train.seed);
  if (!rc.path("embeddings").empty()) {
    try {
      const auto table = text::load_glove(rc.path("embeddings"), words, mc.word_dim, rc.train.seed);
      std::cerr << "embeddings: " << table.found << " of " << words.size() - 2 << " words found\n";
      m.set_word_embeddings(table.matrix);
    } catch (const Error& e) {
      throw Failure{kExitData, e.what()};
    }
  }

  ensure_dir(a.out_dir);
  const fs::path out(a.out_dir);
  {
    auto cfg = open_out(out / "run.cfg");
    rc.write(cfg);
  }
  words.save((out / "words.vocab").string());
  chars.save((out / "chars.vocab").string());
  auto log = open_out(out / "train_log.csv");
  train::write_log_header(log);
  const auto dtype = a.store_f32 ? DType::kFloat32 : DType::kFloat64;
  const auto ckpt = (out / "model.ckpt").string();
  auto hook = [&](const train::EpochRecord& r, bool improved) {
    train::write_log_row(log, r);
    log.flush();
    std::cerr << "epoch " << r.epoch << " lr " << r.lr << " xent " << r.train_xent << " recon " << r.train_recon
              << " dev_acc " << r.dev_acc << (improved ? " *" : "") << '\n';
    if (improved) model::save_checkpoint(ckpt, m, words, chars, dtype);
  };
  const auto result = train::train(m, {train_pairs, dev_pairs, words, chars}, rc.train, hook);

  print_config(std::cout, rc);
  std::cout << "params=" << m.params().scalar_count(false) << '\n'
            << "best_epoch=" << result.best_epoch << '\n'
            << "best_dev_acc=" << train::format_double(result.best_dev_acc) << '\n'
            << "checkpoint=" << ckpt << '\n';
  return kExitOk;
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, ensemble_dir, data, metric = "all";
  std::size_t batch_size = 64;
};

std::vector<std::string> ensemble_files(const std::string& dir) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".ckpt") files.push_back(e.path().string());
  }
  if (ec) throw Failure{kExitConfig, "cannot list ensemble directory " + dir + ": " + ec.message()};
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Failure{kExitConfig, "no .ckpt files in " + dir};
  return files;
}

int cmd_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.ensemble_dir.empty()) {
    throw Failure{kExitConfig, "give exactly one of --checkpoint and --ensemble"};
  }
  std::vector<model::LoadedModel> loaded;
  if (!a.checkpoint.empty()) {
    loaded.push_back(load_model(a.checkpoint));
  } else {
    for (const auto& f : ensemble_files(a.ensemble_dir)) loaded.push_back(load_model(f));
  }
  const auto& first = loaded.front();
  std::vector<model::DrcnModel*> members;
  for (auto& l : loaded) {
    if (l.model->config().num_classes != first.model->config().num_classes) {
      throw Failure{kExitConfig, "ensemble members disagree on the class count"};
    }
    if (!(l.words == first.words) || !(l.chars == first.chars)) {
      throw Failure{kExitConfig, "ensemble members use different vocabularies"};
    }
    members.push_back(l.model.get());
  }
  const int classes = first.model->config().num_classes;
  std::vector<text::SentencePair> pairs;
  try {
    pairs = text::load_pairs(a.data, classes).pairs;
  } catch (const EmptyDatasetError& e) {
    // Rows that only parse under the other class count mean the data does
    // not fit the checkpoint rather than being unusable.
    try {
      text::load_pairs(a.data, classes == 2 ? 3 : 2);
    } catch (const Error&) {
      throw Failure{kExitData, e.what()};
    }
    throw Failure{kExitConfig, a.data + ": labels do not match the checkpoint's " + std::to_string(classes) +
                                   " classes"};
  } catch (const Error& e) {
    throw Failure{kExitData, e.what()};
  }
  const auto rep = a.ensemble_dir.empty()
                       ? train::evaluate(*members.front(), pairs, first.words, first.chars, a.batch_size)
                       : train::evaluate_ensemble(members, pairs, first.words, first.chars, a.batch_size);

  const bool want_rank = a.metric == "map" || a.metric == "mrr";
  if (want_rank && !rep.has_ranking) {
    throw Failure{kExitData, "MAP/MRR need a group id on every row and two classes"};
  }
  std::ostringstream out;
  auto line = [&](const std::string& name, double v) { out << name << '\t' << train::format_double(v) << '\n'; };
  if (a.metric == "acc") {
    line("accuracy", rep.accuracy);
  } else if (a.metric == "map") {
    line("map", rep.ranking.map);
  } else if (a.metric == "mrr") {
    line("mrr", rep.ranking.mrr);
  } else {
    out << "examples\t" << rep.examples << '\n';
    line("accuracy", rep.accuracy);
    if (rep.has_ranking) {
      line("map", rep.ranking.map);
      line("mrr", rep.ranking.mrr);
      out << "groups\t" << rep.ranking.groups << '\n';
      out << "skipped_groups\t" << rep.ranking.skipped_groups << '\n';
    }
    line("xent", rep.xent);
    line("recon", rep.recon);
    const auto& names = text::label_names(classes);
    for (std::size_t k = 0; k < names.size(); ++k) {
      out << "gold." << names[k] << '\t' << rep.gold_counts[k] << '\n';
      out << "predicted." << names[k] << '\t' << rep.predicted_counts[k] << '\n';
      out << "correct." << names[k] << '\t' << rep.correct_counts[k] << '\n';
    }
  }
  std::cout << out.str();
  return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------

struct GradArgs {
  RunOptions run;
  std::string mode = "all", attention = "both";
  double fault = 1.0;
};

int cmd_gradcheck(const GradArgs& a) {
  auto rc = resolve_run_config(a.run, "micro");
  std::vector<model::ConnectionMode> modes;
  if (a.mode == "all") {
    modes = {model::ConnectionMode::kDense, model::ConnectionMode::kResidual, model::ConnectionMode::kPlain};
  } else {
    modes = {model::parse_connection_mode(a.mode)};
  }
  std::vector<bool> attn;
  if (a.attention == "both") attn = {true, false};
  else if (a.attention == "on") attn = {true};
  else if (a.attention == "off") attn = {false};
  else throw ConfigError("--attention expects on, off or both");

  ops::testing::set_backward_fault(a.fault);
  std::ostringstream out;
  double worst = 0.0;
  std::string worst_desc;
  for (auto mode : modes) {
    for (bool on : attn) {
      auto c = rc.model;
      c.connection_mode = mode;
      c.use_attention = on;
      if (mode != model::ConnectionMode::kDense) c.ae_after_layers = std::vector<int>{};
      const auto r = train::model_grad_check(c, rc.train.seed);
      const std::string where = r.worst_name + "[" + std::to_string(r.result.worst_index) + "]";
      out << "mode=" << model::to_string(mode) << " attention=" << (on ? "on" : "off")
          << " coordinates=" << r.result.coordinates << " max_rel=" << r.result.max_relative_error
          << " worst=" << where << " analytic=" << r.result.analytic << " numeric=" << r.result.numeric
          << " seconds=" << r.seconds << '\n';
      if (r.result.max_relative_error >= worst) {
        worst = r.result.max_relative_error;
        worst_desc = model::to_string(mode) + (on ? "+attention " : " ") + where;
      }
    }
  }
  ops::testing::set_backward_fault(1.0);
  out << "max_relative_error\t" << worst << '\n' << "worst\t" << worst_desc << '\n';
  if (!(worst < kGradThreshold)) {
    std::cerr << out.str() << "gradient check failed: " << worst << " >= " << kGradThreshold << '\n';
    return kExitNumeric;
  }
  std::cout << out.str();
  return kExitOk;
}

// ---- visualize ---------------------------------------------------------

struct VisArgs {
  std::string checkpoint, premise, hypothesis, out_dir;
};

int cmd_visualize(const VisArgs& a) {
  auto loaded = load_model(a.checkpoint);
  const auto p = text::tokenize(a.premise);
  const auto q = text::tokenize(a.hypothesis);
  if (p.empty() || q.empty()) throw Failure{kExitData, "premise and hypothesis must contain at least one token"};
  const auto maps = train::attention_maps(*loaded.model, loaded.words, loaded.chars, p, q);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const auto& write) {
    auto out = open_out(dir / name);
    write(out);
    written.push_back((dir / name).string());
  };
  for (std::size_t l = 0; l < maps.alphas.size(); ++l) {
    emit("alpha_layer" + std::to_string(l + 1) + ".csv",
         [&](std::ostream& o) { train::write_matrix_csv(o, maps.alphas[l], maps.premise, maps.hypothesis); });
  }
  if (!maps.alphas.empty()) {
    emit("alpha_avg.csv",
         [&](std::ostream& o) { train::write_matrix_csv(o, maps.alpha_avg, maps.premise, maps.hypothesis); });
  }
  emit("poolrate_p.csv", [&](std::ostream& o) { train::write_rate_csv(o, maps.poolrate_p, maps.premise); });
  emit("poolrate_q.csv", [&](std::ostream& o) { train::write_rate_csv(o, maps.poolrate_q, maps.hypothesis); });
  for (const auto& f : written) std::cout << f << '\n';
  return kExitOk;
}

// ---- ablate ------------------------------------------------------------

struct AblateArgs {
  RunOptions run;
  std::string suite, data, embeddings, out;
  std::size_t synthetic = 5000;
  int budget = 0;
  bool depth_sweep = false;
  bool dry_run = false;
  unsigned jobs = 1;
};

int cmd_ablate(const AblateArgs& a) {
  std::vector<std::string> variants;
  try {
    variants = train::parse_suite(a.suite);
  } catch (const ArgumentError& e) {
    throw Failure{kExitConfig, std::string(e.what()) + "; valid variants: all or a comma list of full, no-ae, "
                                                      "no-etr, no-efix, no-dense-attn, no-dense-rec, no-dense-both, "
                                                      "residual, residual-no-emb, plain-attn, plain-no-attn"};
  }
  auto rc = resolve_run_config(a.run, a.data.empty() ? "synthetic" : "paper-snli");
  if (a.budget > 0) rc.train.epochs = a.budget;
  const auto jobs = a.depth_sweep ? train::depth_sweep_jobs(variants) : train::suite_jobs(variants);

  train::DataSplit split;
  if (a.data.empty()) {
    train::AlignmentTaskOptions opt;
    opt.pairs = a.synthetic;
    opt.seed = rc.train.seed;
    const auto pairs = train::make_alignment_task(opt);
    split = train::split_pairs(pairs, pairs.size() / 10, pairs.size() / 10);
  } else {
    const auto pairs = load_data(a.data, rc.model.num_classes, "ablation");
    if (pairs.size() < 10) throw Failure{kExitData, "ablation data needs at least 10 pairs"};
    split = train::split_pairs(pairs, pairs.size() / 10, pairs.size() / 10);
  }
  const auto words = text::Vocab::build_words(split.train);
  const auto chars = text::Vocab::build_chars(split.train);
  std::optional<Tensor> table;
  if (!a.embeddings.empty()) {
    try {
      table = text::load_glove(a.embeddings, words, rc.model.word_dim, rc.train.seed).matrix;
    } catch (const Error& e) {
      throw Failure{kExitData, e.what()};
    }
  }

  std::ostringstream csv;
  if (a.dry_run) {
    csv << "variant,layers,params\n";
    for (const auto& j : jobs) {
      auto c = train::apply_variant(rc.model, j.variant);
      if (j.layers > 0) c.num_layers = j.layers;
      model::DrcnModel m(c, words.size(), chars.size(), rc.train.seed);
      csv << j.variant << ',' << c.num_layers << ',' << m.params().scalar_count(false) << '\n';
    }
  } else {
    train::AblationSetup setup{rc.model, rc.train, split, words, chars};
    setup.embeddings = table ? &*table : nullptr;
    setup.model_seed = rc.train.seed;
    setup.jobs = std::max(1u, a.jobs);
    const auto rows = train::run_ablation(jobs, setup);
    train::write_ablation_csv(csv, rows);
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    auto f = open_out(a.out);
    f << csv.str();
    std::cout << a.out << '\n';
  }
  return kExitOk;
}

// ---- init --------------------------------------------------------------

struct InitArgs {
  RunOptions run;
  std::string data, out, embeddings;
};

int cmd_init(const InitArgs& a) {
  auto rc = resolve_run_config(a.run, "paper-snli");
  const auto pairs = load_data(a.data, rc.model.num_classes, "vocabulary");
  const auto words = text::Vocab::build_words(pairs);
  const auto chars = text::Vocab::build_chars(pairs);
  model::DrcnModel m(rc.model, words.size(), chars.size(), rc.train.seed);
  if (!a.embeddings.empty()) {
    try {
      m.set_word_embeddings(text::load_glove(a.embeddings, words, rc.model.word_dim, rc.train.seed).matrix);
    } catch (const Error& e) {
      throw Failure{kExitData, e.what()};
    }
  }
  try {
    model::save_checkpoint(a.out, m, words, chars);
  } catch (const Error& e) {
    throw Failure{kExitData, e.what()};
  }
  std::cout << a.out << '\n';
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const EmptyDatasetError*>(&e)) {
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Densely-connected recurrent co-attentive network for sentence matching", "drcn"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model, keeping the best dev checkpoint");
  add_run_options(train_cmd, ta.run, "paper-snli");
  train_cmd->add_option("--train", ta.train_path, "Training pairs (TSV or JSONL)");
  train_cmd->add_option("--dev", ta.dev_path, "Dev pairs");
  train_cmd->add_option("--embeddings", ta.embeddings, "GloVe text file");
  train_cmd->add_option("--out", ta.out_dir, "Output directory")->required();
  train_cmd->add_flag("--f32", ta.store_f32, "Store checkpoint tensors as float32");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or an ensemble directory");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--ensemble", ea.ensemble_dir, "Directory of .ckpt members");
  eval_cmd->add_option("--data", ea.data, "Evaluation pairs")->required();
  eval_cmd->add_option("--metric", ea.metric, "acc, map, mrr or all")
      ->check(CLI::IsMember({"acc", "map", "mrr", "all"}));
  eval_cmd->add_option("--batch-size", ea.batch_size, "Pairs per batch");

  GradArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_run_options(grad_cmd, ga.run, "micro");
  grad_cmd->add_option("--mode", ga.mode, "dense, residual, plain or all");
  grad_cmd->add_option("--attention", ga.attention, "on, off or both");
  grad_cmd->add_option("--fault", ga.fault, "Scale a backward pass (testing)")->group("");

  VisArgs va;
  auto* vis_cmd = app.add_subcommand("visualize", "Export attention weights and max-pool position rates");
  vis_cmd->add_option("--checkpoint", va.checkpoint, "Checkpoint file")->required();
  vis_cmd->add_option("--premise", va.premise, "Premise sentence")->required();
  vis_cmd->add_option("--hypothesis", va.hypothesis, "Hypothesis sentence")->required();
  vis_cmd->add_option("--out", va.out_dir, "Output directory")->required();

  AblateArgs aa;
  auto* abl_cmd = app.add_subcommand("ablate", "Train ablation variants under one budget");
  add_run_options(abl_cmd, aa.run, "synthetic");
  abl_cmd->add_option("--suite", aa.suite, "all or comma-separated variant names")->required();
  abl_cmd->add_option("--data", aa.data, "Pairs split 80/10/10 into train/dev/test (default: synthetic task)");
  abl_cmd->add_option("--synthetic", aa.synthetic, "Synthetic task size when --data is absent");
  abl_cmd->add_option("--embeddings", aa.embeddings, "GloVe text file");
  abl_cmd->add_option("--budget", aa.budget, "Epochs per variant");
  abl_cmd->add_flag("--depth-sweep", aa.depth_sweep, "Train every variant at 1..5 layers");
  abl_cmd->add_flag("--dry-run", aa.dry_run, "List variant configs without training");
  abl_cmd->add_option("--jobs", aa.jobs, "Parallel training jobs");
  abl_cmd->add_option("--out", aa.out, "Report CSV (default: stdout)");

  InitArgs ia;
  auto* init_cmd = app.add_subcommand("init", "Write an untrained checkpoint with vocabularies from a data file");
  add_run_options(init_cmd, ia.run, "paper-snli");
  init_cmd->add_option("--data", ia.data, "Pairs used to build the vocabularies")->required();
  init_cmd->add_option("--embeddings", ia.embeddings, "GloVe text file");
  init_cmd->add_option("--out", ia.out, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*eval_cmd) return cmd_eval(ea);
    if (*grad_cmd) return cmd_gradcheck(ga);
    if (*vis_cmd) return cmd_visualize(va);
    if (*abl_cmd) return cmd_ablate(aa);
    if (*init_cmd) return cmd_init(ia);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace drcn::cli
