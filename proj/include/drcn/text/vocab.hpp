#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drcn::text {

struct SentencePair;

// Token <-> id mapping with reserved ids PAD = 0 and UNK = 1.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  // Returns the id of `token`, inserting it if new.
  std::int32_t add(std::string_view token);
  // Id of `token`, or kUnk when absent.
  std::int32_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Word vocabulary over every token of the given pairs, in first-seen order.
  static Vocab build_words(const std::vector<SentencePair>& pairs);
  // Character vocabulary over the UTF-8 code points of every token.
  static Vocab build_chars(const std::vector<SentencePair>& pairs);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  // "token<TAB>id" lines in id order.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::unordered_map<std::string, std::int32_t> index_;
  std::vector<std::string> tokens_;
};

}  // namespace drcn::text
