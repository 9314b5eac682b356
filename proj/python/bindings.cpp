#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <memory>

#include "drcn/core/errors.hpp"
#include "drcn/model/checkpoint.hpp"
#include "drcn/text/embeddings.hpp"
#include "drcn/text/tokenizer.hpp"
#include "drcn/train/metrics.hpp"
#include "drcn/train/model_check.hpp"
#include "drcn/train/trainer.hpp"
#include "drcn/train/visualize.hpp"

namespace py = pybind11;
using namespace drcn;

namespace {

using KeyValues = std::map<std::string, std::string>;

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> a({t.rows(), t.cols()});
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

KeyValues as_map(const std::vector<std::pair<std::string, std::string>>& kv) { return {kv.begin(), kv.end()}; }

model::ModelConfig make_config(const std::string& preset, const KeyValues& overrides) {
  auto c = model::preset(preset);
  for (const auto& [k, v] : overrides) c.set(k, v);
  c.validate();
  return c;
}

train::TrainConfig make_train_config(const KeyValues& overrides) {
  train::TrainConfig t;
  for (const auto& [k, v] : overrides) t.set(k, v);
  t.validate();
  return t;
}

py::dict report_dict(const train::EvalReport& r) {
  py::dict d;
  d["examples"] = r.examples;
  d["accuracy"] = r.accuracy;
  d["xent"] = r.xent;
  d["recon"] = r.recon;
  if (r.has_ranking) {
    d["map"] = r.ranking.map;
    d["mrr"] = r.ranking.mrr;
    d["groups"] = r.ranking.groups;
    d["skipped_groups"] = r.ranking.skipped_groups;
  }
  return d;
}

// A model together with the vocabularies it was built on.
class PyModel {
 public:
  explicit PyModel(model::LoadedModel loaded) : loaded_(std::move(loaded)) {}

  static PyModel load(const std::string& path) { return PyModel(model::load_checkpoint(path)); }

  void save(const std::string& path, bool f32) const {
    model::save_checkpoint(path, *loaded_.model, loaded_.words, loaded_.chars,
                           f32 ? DType::kFloat32 : DType::kFloat64);
  }

  KeyValues config() const { return as_map(loaded_.model->config().to_key_values()); }
  std::size_t num_params() const { return loaded_.model->params().scalar_count(false); }

  py::array_t<double> predict(const std::vector<std::string>& premises, const std::vector<std::string>& hypotheses,
                              std::size_t batch_size) {
    if (premises.size() != hypotheses.size()) throw ArgumentError("premises and hypotheses differ in length");
    std::vector<text::SentencePair> pairs;
    for (std::size_t i = 0; i < premises.size(); ++i) {
      pairs.push_back({text::tokenize(premises[i]), text::tokenize(hypotheses[i]), 0, {}});
    }
    auto& m = *loaded_.model;
    const auto& c = m.config();
    return to_numpy(train::predict_all([&](const text::Batch& b) { return m.predict(b); }, pairs, loaded_.words,
                                       loaded_.chars, c.max_len, c.max_word_len, batch_size));
  }

  py::dict evaluate(const std::string& path, std::size_t batch_size) {
    const auto pairs = text::load_pairs(path, loaded_.model->config().num_classes).pairs;
    return report_dict(train::evaluate(*loaded_.model, pairs, loaded_.words, loaded_.chars, batch_size));
  }

  py::dict attention(const std::string& premise, const std::string& hypothesis) {
    const auto maps = train::attention_maps(*loaded_.model, loaded_.words, loaded_.chars, text::tokenize(premise),
                                            text::tokenize(hypothesis));
    py::list alphas;
    for (const auto& a : maps.alphas) alphas.append(to_numpy(a));
    py::dict d;
    d["premise"] = maps.premise;
    d["hypothesis"] = maps.hypothesis;
    d["alphas"] = alphas;
    d["alpha_avg"] = to_numpy(maps.alpha_avg);
    d["poolrate_p"] = maps.poolrate_p;
    d["poolrate_q"] = maps.poolrate_q;
    return d;
  }

 private:
  model::LoadedModel loaded_;
};

PyModel init_model(const std::string& data, const std::string& preset, const KeyValues& overrides,
                   std::uint64_t seed) {
  const auto c = make_config(preset, overrides);
  const auto pairs = text::load_pairs(data, c.num_classes).pairs;
  model::LoadedModel loaded;
  loaded.words = text::Vocab::build_words(pairs);
  loaded.chars = text::Vocab::build_chars(pairs);
  loaded.model = std::make_unique<model::DrcnModel>(c, loaded.words.size(), loaded.chars.size(), seed);
  return PyModel(std::move(loaded));
}

py::dict train_model(const std::string& train_path, const std::string& dev_path, const std::string& out,
                     const std::string& preset, const KeyValues& overrides, const KeyValues& train_overrides,
                     const std::string& embeddings) {
  const auto c = make_config(preset, overrides);
  const auto tc = make_train_config(train_overrides);
  const auto train_pairs = text::load_pairs(train_path, c.num_classes).pairs;
  const auto dev_pairs = text::load_pairs(dev_path, c.num_classes).pairs;
  const auto words = text::Vocab::build_words(train_pairs);
  const auto chars = text::Vocab::build_chars(train_pairs);
  model::DrcnModel m(c, words.size(), chars.size(), tc.seed);
  if (!embeddings.empty()) m.set_word_embeddings(text::load_glove(embeddings, words, c.word_dim, tc.seed).matrix);

  train::TrainResult r;
  {
    py::gil_scoped_release release;
    r = train::train(m, {train_pairs, dev_pairs, words, chars}, tc);
  }
  std::filesystem::create_directories(out);
  const auto ckpt = (std::filesystem::path(out) / "model.ckpt").string();
  model::save_checkpoint(ckpt, m, words, chars);

  py::list log;
  for (const auto& e : r.log) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["lr"] = e.lr;
    row["train_xent"] = e.train_xent;
    row["train_recon"] = e.train_recon;
    row["dev_acc"] = e.dev_acc;
    log.append(row);
  }
  py::dict d;
  d["best_dev_acc"] = r.best_dev_acc;
  d["best_epoch"] = r.best_epoch;
  d["steps"] = r.steps;
  d["checkpoint"] = ckpt;
  d["log"] = log;
  return d;
}

}  // namespace

PYBIND11_MODULE(_drcn, m) {
  m.doc() = "Densely-connected recurrent co-attentive network";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<EmptyDatasetError>(m, "EmptyDatasetError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("tokenize", [](const std::string& s) { return text::tokenize(s); });
  m.def("preset_names", &model::preset_names);
  m.def(
      "preset",
      [](const std::string& name, const KeyValues& overrides) {
        return as_map(make_config(name, overrides).to_key_values());
      },
      py::arg("name"), py::arg("overrides") = KeyValues{});

  m.def(
      "average_precision",
      [](const std::vector<double>& s, const std::vector<int>& rel) { return train::average_precision(s, rel); },
      py::arg("scores"), py::arg("relevant"));
  m.def(
      "reciprocal_rank",
      [](const std::vector<double>& s, const std::vector<int>& rel) { return train::reciprocal_rank(s, rel); },
      py::arg("scores"), py::arg("relevant"));
  m.def(
      "ranking_metrics",
      [](const std::vector<double>& s, const std::vector<int>& labels, const std::vector<std::string>& groups) {
        const auto r = train::ranking_metrics(s, labels, groups);
        py::dict d;
        d["map"] = r.map;
        d["mrr"] = r.mrr;
        d["groups"] = r.groups;
        d["skipped_groups"] = r.skipped_groups;
        return d;
      },
      py::arg("scores"), py::arg("labels"), py::arg("group_ids"));

  m.def(
      "grad_check",
      [](const std::string& preset, const KeyValues& overrides, std::uint64_t seed) {
        const auto r = train::model_grad_check(make_config(preset, overrides), seed);
        return py::make_tuple(r.result.max_relative_error, r.worst_name);
      },
      py::arg("preset") = "micro", py::arg("overrides") = KeyValues{}, py::arg("seed") = 1);

  py::class_<PyModel>(m, "Model")
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("save", &PyModel::save, py::arg("path"), py::arg("f32") = false)
      .def_property_readonly("config", &PyModel::config)
      .def_property_readonly("num_params", &PyModel::num_params)
      .def("predict", &PyModel::predict, py::arg("premises"), py::arg("hypotheses"), py::arg("batch_size") = 64)
      .def("evaluate", &PyModel::evaluate, py::arg("path"), py::arg("batch_size") = 64)
      .def("attention", &PyModel::attention, py::arg("premise"), py::arg("hypothesis"));

  m.def("init_model", &init_model, py::arg("data"), py::arg("preset") = "paper-snli",
        py::arg("overrides") = KeyValues{}, py::arg("seed") = 1);
  m.def("train", &train_model, py::arg("train"), py::arg("dev"), py::arg("out"), py::arg("preset") = "paper-snli",
        py::arg("overrides") = KeyValues{}, py::arg("train_overrides") = KeyValues{},
        py::arg("embeddings") = "");
}
