#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "wordchoice/error.hpp"
#include "wordchoice/posfilter.hpp"

using namespace wordchoice;
using namespace wordchoice::pos;

namespace {

Lexicon lexicon_from(const std::string& text) {
  std::istringstream in(text);
  return read_lexicon(in);
}

const char* kFixture =
    "indicate\tverb\n"
    "show\tverb,noun\n"
    "quickly\tadv\n"
    "suggest\tverb\n"
    "guilty\tadj\n"
    "guilt\tnoun\n"
    "on\tprep\n";

SuggestionList list_of(std::initializer_list<const char*> words) {
  SuggestionList out;
  double score = 1.0;
  corpus::WordId id = corpus::kNumReserved;
  for (const char* w : words) {
    out.push_back({w, score, id++});
    score /= 2.0;
  }
  return out;
}

std::vector<std::string> words_of(const SuggestionList& list) {
  std::vector<std::string> out;
  for (const auto& s : list) out.push_back(s.word);
  return out;
}

}  // namespace

TEST(Lexicon, ParsesTagLists) {
  auto lex = lexicon_from(kFixture);
  EXPECT_EQ(lex.size(), 7u);
  const TagSet* show = lex.find("show");
  ASSERT_NE(show, nullptr);
  EXPECT_TRUE(show->contains(Tag::kVerb));
  EXPECT_TRUE(show->contains(Tag::kNoun));
  EXPECT_FALSE(show->contains(Tag::kAdj));
  EXPECT_NE(lex.find("SHOW"), nullptr);
  EXPECT_EQ(lex.find("absent"), nullptr);
}

TEST(Lexicon, EmptyInput) {
  EXPECT_EQ(lexicon_from("").size(), 0u);
  EXPECT_EQ(lexicon_from("\n\n").size(), 0u);
}

TEST(Lexicon, DuplicateLinesMerge) {
  auto lex = lexicon_from("run\tverb\nrun\tnoun\n");
  ASSERT_NE(lex.find("run"), nullptr);
  EXPECT_TRUE(lex.find("run")->contains(Tag::kVerb));
  EXPECT_TRUE(lex.find("run")->contains(Tag::kNoun));
}

TEST(Lexicon, UnknownTag) {
  try {
    lexicon_from("word\tnounn\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("nounn"), std::string::npos);
  }
  EXPECT_THROW(lexicon_from("word\t\n"), FormatError);
}

TEST(Lexicon, MalformedLineReportsLineNumber) {
  try {
    lexicon_from("show\tverb\nno tab here\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(lexicon_from("a\tverb\textra\n"), FormatError);
  EXPECT_THROW(lexicon_from("\tverb\n"), FormatError);
}

TEST(Lexicon, MissingFile) { EXPECT_THROW(load_lexicon("/nonexistent/lexicon.tsv"), IoError); }

TEST(Filter, KeepsSharedPartOfSpeech) {
  auto lex = lexicon_from(kFixture);
  auto in = list_of({"show", "quickly", "suggest"});
  auto r = filter_candidates(lex, "indicate", in);
  EXPECT_FALSE(r.bypassed);
  EXPECT_EQ(words_of(r.kept), (std::vector<std::string>{"show", "suggest"}));
  EXPECT_EQ(r.kept[0], in[0]);
  EXPECT_EQ(r.kept[1], in[2]);
}

TEST(Filter, WordFormChangeIsRemoved) {
  auto lex = lexicon_from(kFixture);
  auto r = filter_candidates(lex, "guilty", list_of({"guilt"}));
  EXPECT_TRUE(r.kept.empty());
}

TEST(Filter, EntrylessCandidatesDropped) {
  auto lex = lexicon_from(kFixture);
  auto r = filter_candidates(lex, "indicate", list_of({"mystery", "show"}));
  EXPECT_EQ(words_of(r.kept), (std::vector<std::string>{"show"}));
}

TEST(Filter, UnknownOriginalBypasses) {
  auto lex = lexicon_from(kFixture);
  auto in = list_of({"on", "quickly", "mystery"});
  auto r = filter_candidates(lex, "towards", in);
  EXPECT_TRUE(r.bypassed);
  EXPECT_EQ(r.kept, in);
}

TEST(Filter, Properties) {
  const std::vector<std::string> pool = {"indicate", "show", "quickly", "suggest", "guilty", "guilt", "on", "mystery"};
  auto lex = lexicon_from(kFixture);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    SuggestionList in;
    for (std::size_t n = pick(rng); n > 0; --n) {
      in.push_back({pool[pick(rng)], 1.0 / static_cast<double>(in.size() + 1), static_cast<corpus::WordId>(in.size() + 3)});
    }
    const std::string original = pool[pick(rng)];
    auto once = filter_candidates(lex, original, in);

    // Subsequence with unchanged entries.
    std::size_t j = 0;
    for (const auto& s : once.kept) {
      while (j < in.size() && !(in[j] == s)) ++j;
      ASSERT_LT(j, in.size());
      ++j;
    }
    auto twice = filter_candidates(lex, original, once.kept);
    EXPECT_EQ(twice.kept, once.kept);

    if (lex.find(original) != nullptr) {
      const bool had = std::any_of(in.begin(), in.end(), [&](const Suggestion& s) { return s.word == original; });
      const bool kept = std::any_of(once.kept.begin(), once.kept.end(), [&](const Suggestion& s) { return s.word == original; });
      EXPECT_EQ(had, kept);
    }
  }
}

namespace {

// Tags by a fixed word table, ignoring context.
class TableTagger : public ContextTagger {
 public:
  TagSet tag(const corpus::Tokens& tokens, std::size_t index) const override {
    const std::string& w = tokens[index];
    if (w == "indicate" || w == "show") return {Tag::kVerb};
    if (w == "quickly") return {Tag::kAdv};
    return {};
  }
};

}  // namespace

TEST(Filter, TaggerHook) {
  TableTagger tagger;
  corpus::Tokens tokens = {"results", "indicate", "that"};
  auto r = filter_with_tagger(tagger, tokens, 1, list_of({"show", "quickly", "unknown"}));
  EXPECT_FALSE(r.bypassed);
  EXPECT_EQ(words_of(r.kept), (std::vector<std::string>{"show"}));

  tokens[1] = "unknown";
  auto b = filter_with_tagger(tagger, tokens, 1, list_of({"show"}));
  EXPECT_TRUE(b.bypassed);
  EXPECT_EQ(words_of(b.kept), (std::vector<std::string>{"show"}));
}
