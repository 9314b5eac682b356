#include "drcn/model/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "drcn/core/errors.hpp"

namespace drcn::model {

namespace {

void write_vocab_section(std::ostream& out, const char* name, const text::Vocab& vocab) {
  out << '[' << name << "] " << vocab.size() << '\n';
  vocab.write(out);
}

text::Vocab read_vocab_section(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("[" + name + "] ", 0) != 0) {
    throw FormatError("checkpoint: expected [" + name + "] section");
  }
  const auto count = std::stoul(line.substr(name.size() + 3));
  std::ostringstream body;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError("checkpoint: truncated [" + name + "] section");
    body << line << '\n';
  }
  std::istringstream body_in(body.str());
  return text::Vocab::read(body_in);
}

}  // namespace

void write_checkpoint(std::ostream& out, const DrcnModel& model, const text::Vocab& words,
                      const text::Vocab& chars, DType dtype) {
  out << kCheckpointMagic << "\n[config]\n";
  for (const auto& [k, v] : model.config().to_key_values()) out << k << '=' << v << '\n';
  write_vocab_section(out, "words", words);
  write_vocab_section(out, "chars", chars);
  out << "[tensors]\n";
  std::vector<NamedTensor> tensors;
  for (const auto& p : model.params().all()) tensors.push_back({p.name, p.var.value()});
  if (model.config().use_batch_norm) {
    tensors.push_back({"bn.running_mean", model.bn_stats().running_mean});
    tensors.push_back({"bn.running_var", model.bn_stats().running_var});
  }
  write_tensors(out, tensors, dtype);
}

void save_checkpoint(const std::string& path, const DrcnModel& model, const text::Vocab& words,
                     const text::Vocab& chars, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  write_checkpoint(out, model, words, chars, dtype);
  if (!out) throw IoError("failed writing checkpoint " + path);
}

LoadedModel read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw FormatError("checkpoint: bad header");
  if (!std::getline(in, line) || line != "[config]") throw FormatError("checkpoint: expected [config]");
  ModelConfig config;
  while (in.peek() != '[' && std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: bad config line '" + line + "'");
    try {
      config.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
  }
  LoadedModel loaded;
  loaded.words = read_vocab_section(in, "words");
  loaded.chars = read_vocab_section(in, "chars");
  if (!std::getline(in, line) || line != "[tensors]") throw FormatError("checkpoint: expected [tensors]");
  const auto tensors = read_tensors(in);

  loaded.model = std::make_unique<DrcnModel>(config, loaded.words.size(), loaded.chars.size(), 0);
  auto& model = *loaded.model;
  std::size_t matched = 0;
  for (const auto& nt : tensors) {
    Tensor* target = nullptr;
    Var param;
    if (nt.name == "bn.running_mean" && config.use_batch_norm) {
      target = &model.bn_stats().running_mean;
    } else if (nt.name == "bn.running_var" && config.use_batch_norm) {
      target = &model.bn_stats().running_var;
    } else if (model.params().contains(nt.name)) {
      param = model.params().var(nt.name);
      target = &param.mutable_value();
    }
    if (!target) throw FormatError("checkpoint: unexpected tensor '" + nt.name + "'");
    if (target->shape() != nt.tensor.shape()) {
      throw FormatError("checkpoint: tensor '" + nt.name + "' has shape " + shape_to_string(nt.tensor.shape()) +
                        ", model expects " + shape_to_string(target->shape()));
    }
    *target = nt.tensor;
    ++matched;
  }
  const std::size_t expected = model.params().all().size() + (config.use_batch_norm ? 2 : 0);
  if (matched != expected) {
    throw FormatError("checkpoint: holds " + std::to_string(matched) + " of " + std::to_string(expected) +
                      " tensors");
  }
  return loaded;
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace drcn::model
