#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "drcn/model/checkpoint.hpp"
#include "drcn/text/dataset.hpp"
#include "drcn/text/vocab.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    char tmpl[] = "/tmp/drcn-cli-XXXXXX";
    dir_ = mkdtemp(tmpl);
    spit(dir_ / "toy.tsv",
         "entailment\ta man sleeps\ta man rests\n"
         "neutral\ta dog runs\tthe dog is fast\n"
         "contradiction\tkids play\tnobody plays\n"
         "entailment\tthe sun is hot\tit is hot\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result drcn(const std::string& args, const std::string& env = "") {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" DRCN_BIN "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path dir_;
};

constexpr const char* kMicroFit =
    "--preset micro --set epochs=60 --set patience=0 --set lr=0.01 --set embed_keep=1 --set fc_keep=1 "
    "--set ae_keep=1";

TEST_F(CliTest, MissingTrainFileIsDataError) {
  const auto r = drcn("train --preset micro --train missing.tsv --dev toy.tsv --out run");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.tsv"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, PaperSnliPresetEchoesMaxLen) {
  const auto r = drcn("train --preset paper-snli --train toy.tsv --dev toy.tsv --out run --set epochs=1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nmax_len=35\n"), std::string::npos);
  EXPECT_NE(r.out.find("\nnum_layers=5\n"), std::string::npos);
  for (const char* f : {"model.ckpt", "words.vocab", "chars.vocab", "train_log.csv", "run.cfg"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
}

TEST_F(CliTest, SameSeedGivesByteIdenticalCheckpoints) {
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out a --seed 9 --set epochs=3").code, 0);
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out b --set epochs=3", "DRCN_SEED=9").code,
            0);
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out c --seed 10 --set epochs=3").code, 0);
  const auto a = slurp(dir_ / "a/model.ckpt");
  EXPECT_EQ(a, slurp(dir_ / "b/model.ckpt"));
  EXPECT_NE(a, slurp(dir_ / "c/model.ckpt"));
  EXPECT_EQ(slurp(dir_ / "a/run.cfg"), slurp(dir_ / "b/run.cfg"));
}

TEST_F(CliTest, RunConfigFile) {
  spit(dir_ / "run.cfg", "# toy run\nmax_len=4\npreset=micro\nepochs=2\ntrain=toy.tsv\ndev=toy.tsv\n");
  const auto r = drcn("train --config run.cfg --out run");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nmax_len=4\n"), std::string::npos);  // preset applied first
  EXPECT_NE(r.out.find("\nlstm_hidden=4\n"), std::string::npos);

  spit(dir_ / "bad.cfg", "preset=micro\nhidden_size=3\n");
  auto bad = drcn("train --config bad.cfg --out run2");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("hidden_size"), std::string::npos);
  EXPECT_TRUE(bad.out.empty());

  spit(dir_ / "dup.cfg", "epochs=2\nepochs=3\n");
  EXPECT_EQ(drcn("train --config dup.cfg --out run3").code, 1);
}

TEST_F(CliTest, EvalPerfectToyCheckpoint) {
  ASSERT_EQ(drcn(std::string("train --train toy.tsv --dev toy.tsv --out fit ") + kMicroFit).code, 0);
  const auto r = drcn("eval --checkpoint fit/model.ckpt --data toy.tsv --metric acc");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "accuracy\t1\n");
}

TEST_F(CliTest, SingleMemberEnsembleMatchesPlainEval) {
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out run --set epochs=2").code, 0);
  fs::create_directory(dir_ / "ens");
  fs::copy_file(dir_ / "run/model.ckpt", dir_ / "ens/m1.ckpt");
  const auto plain = drcn("eval --checkpoint run/model.ckpt --data toy.tsv");
  const auto ens = drcn("eval --ensemble ens --data toy.tsv");
  ASSERT_EQ(plain.code, 0);
  ASSERT_EQ(ens.code, 0);
  EXPECT_EQ(plain.out, ens.out);
}

TEST_F(CliTest, EnsembleClassMismatchAndBadCheckpoint) {
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out three --set epochs=1").code, 0);
  spit(dir_ / "bin.tsv", "positive\ta man sleeps\ta man rests\nnegative\tkids play\tnobody plays\n");
  ASSERT_EQ(drcn("train --preset micro --set num_classes=2 --train bin.tsv --dev bin.tsv --out two --set epochs=1")
                .code,
            0);
  fs::create_directory(dir_ / "mixed");
  fs::copy_file(dir_ / "three/model.ckpt", dir_ / "mixed/a.ckpt");
  fs::copy_file(dir_ / "two/model.ckpt", dir_ / "mixed/b.ckpt");
  EXPECT_EQ(drcn("eval --ensemble mixed --data toy.tsv").code, 1);
  spit(dir_ / "junk.ckpt", "drcn-checkpoint 9\n");
  const auto r = drcn("eval --checkpoint junk.ckpt --data toy.tsv");
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, MapMrrOnCraftedGroups) {
  // Constant scores: the ranking is file order. q1: positive 2nd of 3 ->
  // AP 1/2, RR 1/2. q2: positives 1st and 3rd -> AP (1 + 2/3)/2, RR 1.
  spit(dir_ / "rank.tsv",
       "negative\twhat is red\tthe sky\tq1\n"
       "positive\twhat is red\ta rose\tq1\n"
       "negative\twhat is red\tthe sea\tq1\n"
       "positive\twho sleeps\ta cat\tq2\n"
       "negative\twho sleeps\ta rock\tq2\n"
       "positive\twho sleeps\ta dog\tq2\n");
  const auto pairs = drcn::text::load_pairs((dir_ / "rank.tsv").string(), 2).pairs;
  auto c = drcn::model::preset("micro");
  c.num_classes = 2;
  const auto words = drcn::text::Vocab::build_words(pairs);
  const auto chars = drcn::text::Vocab::build_chars(pairs);
  drcn::model::DrcnModel m(c, words.size(), chars.size(), 3);
  drcn::Var w = m.params().var("out.w");
  w.mutable_value().fill(0.0);
  drcn::model::save_checkpoint((dir_ / "flat.ckpt").string(), m, words, chars);

  const auto map = drcn("eval --checkpoint flat.ckpt --data rank.tsv --metric map");
  const auto mrr = drcn("eval --checkpoint flat.ckpt --data rank.tsv --metric mrr");
  ASSERT_EQ(map.code, 0) << map.err;
  const double expected_map = (0.5 + (1.0 + 2.0 / 3.0) / 2.0) / 2.0;
  EXPECT_NEAR(std::stod(map.out.substr(4)), expected_map, 1e-15);
  EXPECT_EQ(mrr.out, "mrr\t0.75\n");
  EXPECT_EQ(drcn("eval --checkpoint flat.ckpt --data toy.tsv --metric map").code, 1);  // 3-class data vs 2
}

TEST_F(CliTest, GradcheckPassesAndFaultExitsThree) {
  const auto dense = drcn("gradcheck --mode dense --attention on");
  EXPECT_EQ(dense.code, 0) << dense.err;
  EXPECT_NE(dense.out.find("max_relative_error\t"), std::string::npos);
  EXPECT_EQ(drcn("gradcheck --mode residual").code, 0);
  const auto fault = drcn("gradcheck --mode dense --attention on --fault 1.5");
  EXPECT_EQ(fault.code, 3);
  EXPECT_TRUE(fault.out.empty());
  EXPECT_NE(fault.err.find("worst"), std::string::npos);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(CliTest, VisualizeOneTokenSentences) {
  ASSERT_EQ(drcn("train --preset micro --train toy.tsv --dev toy.tsv --out run --set epochs=1").code, 0);
  const auto r = drcn("visualize --checkpoint run/model.ckpt --premise dog --hypothesis dog --out vis");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"alpha_layer1.csv", "alpha_layer2.csv", "alpha_avg.csv"}) {
    const auto rows = read_csv(dir_ / "vis" / f);
    ASSERT_EQ(rows.size(), 2u) << f;
    EXPECT_EQ(rows[0], (std::vector<std::string>{"token", "dog"}));
    EXPECT_EQ(rows[1], (std::vector<std::string>{"dog", "1"}));
  }
  EXPECT_EQ(read_csv(dir_ / "vis/poolrate_p.csv")[1], std::vector<std::string>{"1"});
}

TEST_F(CliTest, VisualizeTableOnePairUnderPaperPreset) {
  spit(dir_ / "t1.tsv",
       "entailment\tTwo bicyclists in spandex and helmets in a race pedaling uphill.\t"
       "A pair of humans are riding their bicycle with tight clothing, competing with each other.\n");
  ASSERT_EQ(drcn("init --preset paper-snli --data t1.tsv --out snli.ckpt").code, 0);
  const auto r = drcn(
      "visualize --checkpoint snli.ckpt --premise 'Two bicyclists in spandex and helmets in a race pedaling uphill.' "
      "--hypothesis 'A pair of humans are riding their bicycle with tight clothing, competing with each other.' "
      "--out vis");
  ASSERT_EQ(r.code, 0) << r.err;
  int alpha_files = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "vis")) {
    const auto name = e.path().filename().string();
    if (name.rfind("alpha_layer", 0) == 0) ++alpha_files;
  }
  EXPECT_EQ(alpha_files, 5);
  for (const char* f : {"poolrate_p.csv", "poolrate_q.csv"}) {
    const auto rows = read_csv(dir_ / "vis" / f);
    ASSERT_EQ(rows.size(), 2u);
    double sum = 0.0;
    for (const auto& v : rows[1]) sum += std::stod(v);
    EXPECT_NEAR(sum, 1.0, 1e-9) << f;
  }
  // The hypothesis comma is a token of its own and must be quoted.
  EXPECT_NE(slurp(dir_ / "vis/alpha_avg.csv").find(",\",\","), std::string::npos);
  EXPECT_EQ(drcn("visualize --checkpoint nope.ckpt --premise a --hypothesis b --out v2").code, 1);
}

TEST_F(CliTest, AblateArguments) {
  const auto empty = drcn("ablate --suite ''");
  EXPECT_EQ(empty.code, 1);
  EXPECT_TRUE(empty.out.empty());
  EXPECT_EQ(drcn("ablate --suite full,deeper").code, 1);

  const auto listed = drcn("ablate --suite all --dry-run");
  ASSERT_EQ(listed.code, 0) << listed.err;
  std::istringstream in(listed.out);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 12u);
  EXPECT_EQ(lines[0], "variant,layers,params");
  EXPECT_EQ(lines[1].substr(0, 5), "full,");
  EXPECT_EQ(lines[11].substr(0, 14), "plain-no-attn,");

  const auto sweep = drcn("ablate --suite plain-attn --depth-sweep --dry-run");
  ASSERT_EQ(sweep.code, 0);
  EXPECT_NE(sweep.out.find("plain-attn,5,"), std::string::npos);
}

TEST_F(CliTest, AblateRunsSmallSuite) {
  const auto r = drcn("ablate --suite full,plain-no-attn --preset micro --synthetic 200 --budget 1 --jobs 2 "
                      "--out report.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir_ / "report.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"variant", "layers", "dev_acc", "accuracy", "params"}));
  EXPECT_EQ(rows[1][0], "full");
  EXPECT_EQ(rows[2][0], "plain-no-attn");
}

}  // namespace
