#include "drcn/text/vocab.hpp"

#include <fstream>
#include <sstream>

#include "drcn/core/errors.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/tokenizer.hpp"

namespace drcn::text {

Vocab::Vocab() {
  add(kPadToken);
  add(kUnkToken);
}

std::int32_t Vocab::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw LookupError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab Vocab::build_words(const std::vector<SentencePair>& pairs) {
  Vocab v;
  for (const auto& p : pairs) {
    for (const auto& t : p.premise) v.add(t);
    for (const auto& t : p.hypothesis) v.add(t);
  }
  return v;
}

Vocab Vocab::build_chars(const std::vector<SentencePair>& pairs) {
  Vocab v;
  auto add_all = [&v](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      for (const auto& c : utf8_chars(t)) v.add(c);
    }
  };
  for (const auto& p : pairs) {
    add_all(p.premise);
    add_all(p.hypothesis);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw FormatError("vocabulary must start with " + std::string(kPadToken) + " and " + std::string(kUnkToken));
  }
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw FormatError("duplicate vocabulary entry '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

void Vocab::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocab Vocab::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw FormatError("vocabulary line without a tab: '" + line + "'");
    const auto id = std::stoul(line.substr(tab + 1));
    if (id != tokens.size()) throw FormatError("vocabulary ids must be dense and ordered");
    tokens.push_back(line.substr(0, tab));
  }
  return from_tokens(tokens);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary to " + path);
  write(out);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary from " + path);
  return read(in);
}

}  // namespace drcn::text
