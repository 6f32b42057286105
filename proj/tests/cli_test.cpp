#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "wordchoice/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = WORDCHOICE_DATA_DIR;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "wordchoice");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = wordchoice::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> small_train_flags() {
  return {"--embed-dim", "8", "--hidden", "8", "--batch-size", "20", "--epochs", "2", "--lr", "1", "--seed", "3"};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("wordchoice_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    auto args = std::vector<std::string>{"train", "--corpus", kData + "/corpus.txt", "--out", path("m.blwc")};
    for (const auto& f : small_train_flags()) args.push_back(f);
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  auto unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("train"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"train", "--out", path("x.blwc")}).code, 1);
  EXPECT_EQ(run({"suggest", "--model", path("m.blwc"), "--bogus-flag", "a *b* c"}).code, 1);
  EXPECT_EQ(run({"eval", "--testset", kData + "/testset.jsonl"}).code, 1);
  EXPECT_EQ(run({"eval", "--model", path("m.blwc"), "--ngram", path("t.ngram"), "--testset", kData + "/testset.jsonl"}).code, 1);
  EXPECT_EQ(run({"train", "--corpus", kData + "/corpus.txt", "--out", path("x.blwc"), "--hidden", "0"}).code, 1);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run({"suggest", "--model", path("missing.blwc"), "a *b* c"}).code, 2);
  EXPECT_EQ(run({"train", "--corpus", path("missing.txt"), "--out", path("x.blwc")}).code, 2);
  std::ofstream(path("garbage.blwc")) << "not a checkpoint";
  EXPECT_EQ(run({"suggest", "--model", path("garbage.blwc"), "a *b* c"}).code, 2);
  std::ofstream(path("bad.tsv")) << "word\tnounn\n";
  auto r = run({"suggest", "--model", path("m.blwc"), "--lexicon", path("bad.tsv"), "a *b* c"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nounn"), std::string::npos);
}

TEST_F(CliTest, Prep) {
  auto r = run({"prep", "--corpus", kData + "/corpus.txt", "--out-corpus", path("tok.txt"), "--out-vocab",
                path("vocab.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto stats = json::parse(r.out);
  EXPECT_EQ(stats["sentences_in"], 400);
  EXPECT_EQ(stats["sentences_kept"], 400);
  auto first = slurp(path("tok.txt")).substr(0, 12);
  EXPECT_EQ(first, wordchoice::corpus::to_lower(first));
  auto vocab = wordchoice::corpus::load_vocab(path("vocab.txt"));
  EXPECT_EQ(vocab.size(), stats["vocab_size"].get<std::size_t>());
  EXPECT_TRUE(vocab.contains("results"));
}

TEST_F(CliTest, TrainingIsReproducible) {
  auto args = std::vector<std::string>{"train", "--corpus", kData + "/corpus.txt", "--out", path("again.blwc")};
  for (const auto& f : small_train_flags()) args.push_back(f);
  auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = json::parse(r.out);
  EXPECT_EQ(report["epoch_mean_loss"].size(), 2u);
  EXPECT_EQ(report["sentences"], 400);
  EXPECT_EQ(slurp(path("again.blwc")), slurp(path("m.blwc")));
  EXPECT_NE(r.err.find("config"), std::string::npos);
}

TEST_F(CliTest, SuggestPrintsRankedLines) {
  auto r = run({"suggest", "--model", path("m.blwc"), "--lexicon", kData + "/lexicon.tsv", "--k", "3",
                "The results clearly *indicate* that our method outperforms the baseline."});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  double prev = 2.0;
  while (std::getline(lines, line)) {
    ++n;
    std::istringstream f(line);
    int rank = 0;
    std::string word;
    double p = 0.0;
    f >> rank >> word >> p;
    EXPECT_EQ(rank, n);
    EXPECT_FALSE(word.empty());
    EXPECT_LE(p, prev);
    prev = p;
  }
  EXPECT_EQ(n, 3);
  EXPECT_EQ(run({"suggest", "--model", path("m.blwc"), "no marker here"}).code, 2);
}

TEST_F(CliTest, EvalReports) {
  auto r = run({"eval", "--model", path("m.blwc"), "--testset", kData + "/testset.jsonl", "--lexicon",
                kData + "/lexicon.tsv", "--annotations-a", kData + "/annotations_a.jsonl", "--annotations-b",
                kData + "/annotations_b.jsonl", "--report", path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_TRUE(j.contains("mrr"));
  EXPECT_EQ(j["cases_evaluated"], 12);
  EXPECT_GE(j["combined"]["mrr"].get<double>(), j["intersection"]["mrr"].get<double>());
  EXPECT_GE(j["intersection"]["mrr"].get<double>(), j["mrr"].get<double>());
  EXPECT_EQ(json::parse(slurp(path("report.json"))), j);

  auto t = run({"eval", "--model", path("m.blwc"), "--testset", kData + "/testset.jsonl", "--table"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("preposition"), std::string::npos);
  EXPECT_NE(t.out.find("Overall"), std::string::npos);
}

TEST_F(CliTest, NGramBaseline) {
  auto tr = run({"train-ngram", "--corpus", kData + "/corpus.txt", "--order", "3", "--out", path("t.ngram")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  auto r = run({"eval", "--ngram", path("t.ngram"), "--testset", kData + "/testset.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["cases_evaluated"], 12);
  EXPECT_GT(j["mrr"].get<double>(), 0.0);
}

TEST_F(CliTest, RnnLmBaseline) {
  auto args = std::vector<std::string>{"train-rnnlm", "--corpus", kData + "/corpus.txt", "--out", path("r.blwc"),
                                       "--direction", "right-to-left"};
  for (const auto& f : small_train_flags()) args.push_back(f);
  auto tr = run(args);
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(wordchoice::checkpoint::peek_kind(path("r.blwc")), wordchoice::checkpoint::kKindRnnLm);
  auto s = run({"suggest", "--model", path("r.blwc"), "--no-filter", "--k", "2", "we *train* the model"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(std::count(s.out.begin(), s.out.end(), '\n'), 2);
  auto e = run({"eval", "--model", path("r.blwc"), "--testset", kData + "/testset.jsonl"});
  EXPECT_EQ(e.code, 0) << e.err;
}
