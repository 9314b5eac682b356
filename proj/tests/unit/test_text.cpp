#include <gtest/gtest.h>

#include <unistd.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "drcn/core/errors.hpp"
#include "drcn/core/rng.hpp"
#include "drcn/text/batching.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/embeddings.hpp"
#include "drcn/text/tokenizer.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::text {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("drcn_text_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& contents) const {
    const auto p = (path_ / name).string();
    std::ofstream(p, std::ios::binary) << contents;
    return p;
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string run_shell(const std::string& command) {
  std::string out;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  ::pclose(pipe);
  return out;
}

double total(const Tensor& t) { return std::accumulate(t.storage().begin(), t.storage().end(), 0.0); }

SentencePair pair_of(const std::string& p, const std::string& q, int label = 0) {
  return SentencePair{tokenize(p), tokenize(q), label, ""};
}

TEST(TokenizerTest, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("A man, sleeps."), (std::vector<std::string>{"a", "man", ",", "sleeps", "."}));
  EXPECT_EQ(tokenize("  don't\tstop "), (std::vector<std::string>{"don", "'", "t", "stop"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(TokenizerTest, Deterministic) {
  const std::string s = "The quick (brown) fox -- jumps!";
  EXPECT_EQ(tokenize(s), tokenize(s));
}

TEST(TokenizerTest, Utf8CodePoints) {
  EXPECT_EQ(utf8_chars("caf\xC3\xA9"), (std::vector<std::string>{"c", "a", "f", "\xC3\xA9"}));
  EXPECT_EQ(utf8_chars("\xE2\x82\xAC\xF0\x9F\x98\x80").size(), 2u);
  EXPECT_EQ(utf8_chars("\xFF" "a").size(), 2u);
}

TEST(VocabTest, ReservedIdsAndUnk) {
  Vocab v;
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.id("<pad>"), Vocab::kPad);
  EXPECT_EQ(v.id("<unk>"), Vocab::kUnk);
  const auto cat = v.add("cat");
  EXPECT_EQ(cat, 2);
  EXPECT_EQ(v.add("cat"), 2);
  EXPECT_EQ(v.id("dog"), Vocab::kUnk);
  EXPECT_EQ(v.token(2), "cat");
  EXPECT_THROW(v.token(9), LookupError);
}

TEST(VocabTest, RoundTripsThroughText) {
  const auto v = Vocab::build_words({pair_of("a man sleeps", "a person rests")});
  std::stringstream ss;
  v.write(ss);
  EXPECT_EQ(ss.str().substr(0, 16), "<pad>\t0\n<unk>\t1\n");
  const auto back = Vocab::read(ss);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.size(), 7u);
}

TEST(VocabTest, CharVocabulary) {
  const auto v = Vocab::build_chars({pair_of("ab", "ba c")});
  EXPECT_EQ(v.size(), 5u);
  EXPECT_TRUE(v.contains("c"));
}

TEST(LoadPairsTest, SingleTsvRow) {
  TempDir dir;
  const auto path = dir.file("one.tsv", "entailment\ta man sleeps\ta person rests\n");
  const auto r = load_pairs(path, 3);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].label, 0);
  EXPECT_EQ(r.pairs[0].premise, (std::vector<std::string>{"a", "man", "sleeps"}));
  EXPECT_EQ(r.skipped, 0u);
}

TEST(LoadPairsTest, SkipsUnknownLabels) {
  TempDir dir;
  const auto path = dir.file("mixed.tsv",
                             "entailment\ta b\tc d\n"
                             "-\ta b\tc d\n"
                             "contradiction\te f\tg h\n");
  const auto r = load_pairs(path, 3);
  EXPECT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.pairs[1].label, 2);
}

TEST(LoadPairsTest, Jsonl) {
  TempDir dir;
  const auto path = dir.file("d.jsonl",
                             "{\"label\": \"positive\", \"sentence1\": \"how old\", \"sentence2\": \"what age\", "
                             "\"group_id\": \"q7\"}\n"
                             "{\"label\": 0, \"sentence1\": \"x\", \"sentence2\": \"y\"}\n");
  const auto r = load_pairs(path, 2);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].label, 1);
  EXPECT_EQ(r.pairs[0].group_id, "q7");
  EXPECT_EQ(r.pairs[1].label, 0);
}

TEST(LoadPairsTest, Errors) {
  TempDir dir;
  EXPECT_THROW(load_pairs(dir.path("missing.tsv"), 3), IoError);
  const auto bad = dir.file("bad.tsv", "maybe\ta\tb\n");
  EXPECT_THROW(load_pairs(bad, 3), EmptyDatasetError);
}

TEST(LoadPairsTest, LabelHistogramMatchesShellCount) {
  TempDir dir;
  const std::vector<std::string> labels{"entailment", "neutral", "contradiction"};
  std::ostringstream rows;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    rows << labels[uniform_index(rng, 3)] << "\tthe premise number " << i << "\tsome hypothesis\n";
  }
  const auto path = dir.file("dev.tsv", rows.str());
  const auto r = load_pairs(path, 3);
  ASSERT_EQ(r.pairs.size(), 10000u);

  std::map<std::string, int> ours;
  for (const auto& p : r.pairs) ++ours[labels[static_cast<std::size_t>(p.label)]];
  std::map<std::string, int> shell;
  std::istringstream out(run_shell("cut -f1 '" + path + "' | sort | uniq -c"));
  int count = 0;
  std::string name;
  while (out >> count >> name) shell[name] = count;
  EXPECT_EQ(ours, shell);
}

TEST(GloveTest, CopiesRowsAndRandomisesTheRest) {
  TempDir dir;
  Vocab v;
  v.add("cat");
  v.add("dog");
  const auto path = dir.file("g.txt", "cat 0.1 0.2 0.3\nbird 1 2 3\n");
  const auto t = load_glove(path, v, 3, 5);
  EXPECT_EQ(t.matrix.at(2, 0), 0.1);
  EXPECT_EQ(t.matrix.at(2, 1), 0.2);
  EXPECT_EQ(t.matrix.at(2, 2), 0.3);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(t.matrix.at(0, c), 0.0);
  EXPECT_NE(t.matrix.at(3, 0), 0.0);
  EXPECT_EQ(t.found, 1u);
  EXPECT_DOUBLE_EQ(t.coverage, 0.5);
}

TEST(GloveTest, EmptyFileGivesRandomRows) {
  TempDir dir;
  Vocab v;
  v.add("cat");
  const auto t = load_glove(dir.file("empty.txt", ""), v, 4, 3);
  EXPECT_EQ(t.coverage, 0.0);
  EXPECT_EQ(t.matrix, random_embeddings(v.size(), 4, 3));
}

TEST(GloveTest, OovRowsHaveSmallSpread) {
  const auto t = random_embeddings(2002, 50, 9);
  double sum = 0.0, sq = 0.0;
  const std::size_t n = 2000 * 50;
  for (std::size_t i = 100; i < t.size(); ++i) {
    sum += t[i];
    sq += t[i] * t[i];
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 3e-4);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.01, 3e-4);
}

TEST(GloveTest, InconsistentDimensionThrows) {
  TempDir dir;
  Vocab v;
  EXPECT_THROW(load_glove(dir.file("a.txt", "cat 0.1 0.2\n"), v, 3, 1), FormatError);
  EXPECT_THROW(load_glove(dir.file("b.txt", "cat 0.1 0.2 0.3 0.4\n"), v, 3, 1), FormatError);
}

TEST(GloveTest, CoverageMatchesGrep) {
  TempDir dir;
  Rng rng(21);
  Vocab v;
  std::ostringstream vocab_list;
  for (int i = 0; i < 100; ++i) {
    const std::string w = "w" + std::to_string(i);
    v.add(w);
    vocab_list << w << '\n';
  }
  std::ostringstream glove;
  for (int i = 0; i < 400; ++i) {
    const auto k = uniform_index(rng, 300);
    glove << (k % 2 ? "w" : "x") << k << " 0.5 -0.5\n";
  }
  const auto gpath = dir.file("glove.txt", glove.str());
  const auto vpath = dir.file("vocab.txt", vocab_list.str());
  const auto t = load_glove(gpath, v, 2, 1);
  const int grep_count = std::stoi(run_shell("cut -d' ' -f1 '" + gpath + "' | sort -u | grep -Fx -f '" + vpath +
                                             "' | wc -l"));
  EXPECT_EQ(static_cast<int>(t.found), grep_count);
  EXPECT_GT(grep_count, 0);
  EXPECT_DOUBLE_EQ(t.coverage, grep_count / 100.0);
}

TEST(ExactMatchTest, Examples) {
  EXPECT_EQ(exact_match_flags({"A", "dog"}, {"the", "dog"}), (std::vector<double>{0.0, 1.0}));
  const std::vector<std::string> s{"x", "Y", "z"};
  EXPECT_EQ(exact_match_flags(s, s), (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(exact_match_flags({"Dog"}, {"DOG"}), (std::vector<double>{1.0}));
}

TEST(ExactMatchTest, AgreesWithBruteForce) {
  Rng rng(4);
  const std::vector<std::string> pool{"a", "B", "c", "D", "e", "f", "G", "h", "b", "d"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> p(1 + uniform_index(rng, 12)), q(1 + uniform_index(rng, 12));
    for (auto& t : p) t = pool[uniform_index(rng, pool.size())];
    for (auto& t : q) t = pool[uniform_index(rng, pool.size())];
    const auto flags = exact_match_flags(p, q);
    for (std::size_t i = 0; i < p.size(); ++i) {
      bool found = false;
      for (const auto& w : q) {
        if (w.size() != p[i].size()) continue;
        bool same = true;
        for (std::size_t k = 0; k < w.size(); ++k) {
          if (std::tolower(static_cast<unsigned char>(w[k])) != std::tolower(static_cast<unsigned char>(p[i][k]))) {
            same = false;
          }
        }
        found = found || same;
      }
      ASSERT_EQ(flags[i], found ? 1.0 : 0.0);
    }
  }
}

class BatchingTest : public ::testing::Test {
 protected:
  void SetUp() override {
    pairs = {pair_of("a man sleeps", "a person rests", 0), pair_of("dogs run", "animals move quickly", 1),
             pair_of("hello", "goodbye friend", 2)};
    words = Vocab::build_words(pairs);
    chars = Vocab::build_chars(pairs);
  }
  std::vector<SentencePair> pairs;
  Vocab words, chars;
};

TEST_F(BatchingTest, SizesFollowBatchSize) {
  BatchOptions o;
  o.batch_size = 2;
  const auto batches = make_batches(pairs, words, chars, o);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].size, 2u);
  EXPECT_EQ(batches[1].size, 1u);
}

TEST_F(BatchingTest, SameSeedSameOrder) {
  std::vector<SentencePair> many;
  for (int i = 0; i < 50; ++i) many.push_back(pair_of("w" + std::to_string(i), "v", i % 3));
  BatchOptions o;
  o.batch_size = 4;
  o.seed = 99;
  const auto a = make_batches(many, words, chars, o);
  const auto b = make_batches(many, words, chars, o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].indices, b[i].indices);
    EXPECT_EQ(a[i].premise.ids, b[i].premise.ids);
  }
  o.seed = 100;
  const auto c = make_batches(many, words, chars, o);
  EXPECT_NE(a[0].indices, c[0].indices);
}

TEST_F(BatchingTest, TruncatesAtMaxLen) {
  std::string long_sentence;
  for (int i = 0; i < 40; ++i) long_sentence += "t" + std::to_string(i) + " ";
  const auto b = make_batch({pair_of(long_sentence, "short one")}, words, chars, 35);
  EXPECT_EQ(b.premise.steps, 35u);
  EXPECT_EQ(total(b.premise.mask), 35.0);
  EXPECT_EQ(total(b.hypothesis.mask), 2.0);
}

TEST_F(BatchingTest, MasksIdsAndFlagsAreConsistent) {
  const auto b = make_batch(pairs, words, chars, 35);
  EXPECT_EQ(b.premise.steps, 3u);
  EXPECT_EQ(b.hypothesis.steps, 3u);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t t = 0; t < b.premise.steps; ++t) {
      const std::size_t row = i * b.premise.steps + t;
      const bool real = t < pairs[i].premise.size();
      EXPECT_EQ(b.premise.mask.at(i, t), real ? 1.0 : 0.0);
      if (real) {
        EXPECT_EQ(b.premise.ids[row], words.id(pairs[i].premise[t]));
      } else {
        EXPECT_EQ(b.premise.ids[row], Vocab::kPad);
        EXPECT_EQ(b.premise.flags.at(row, 0), 0.0);
        for (std::size_t k = 0; k < b.word_len; ++k) EXPECT_EQ(b.premise.chars[row * b.word_len + k], Vocab::kPad);
      }
    }
  }
  // "a" appears on both sides of the first pair.
  EXPECT_EQ(b.premise.flags.at(0, 0), 1.0);
  EXPECT_EQ(b.premise.flags.at(1, 0), 0.0);
  EXPECT_EQ(b.labels, (std::vector<int>{0, 1, 2}));
}

TEST_F(BatchingTest, CharsPaddedToLongestWord) {
  const auto b = make_batch(pairs, words, chars, 35);
  EXPECT_EQ(b.word_len, 7u);  // "animals", "quickly"
  const auto& sleeps = b.premise.chars;
  const std::size_t row = 2;  // "sleeps"
  EXPECT_EQ(sleeps[row * 7 + 0], chars.id("s"));
  EXPECT_EQ(sleeps[row * 7 + 5], chars.id("s"));
  EXPECT_EQ(sleeps[row * 7 + 6], Vocab::kPad);

  const auto longer = make_batch({pair_of("supercalifragilisticexpialidocious", "x")}, words, chars, 35);
  EXPECT_EQ(longer.word_len, kMaxWordLength);
}

TEST_F(BatchingTest, UnknownWordsMapToUnk) {
  const auto b = make_batch({pair_of("zebra", "a")}, words, chars, 35);
  EXPECT_EQ(b.premise.ids[0], Vocab::kUnk);
}

}  // namespace
}  // namespace drcn::text
