#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"

using namespace wordchoice;
using namespace wordchoice::corpus;

TEST(Tokenize, LowercasesWords) {
  EXPECT_EQ(tokenize("The results clearly indicate"), (Tokens{"the", "results", "clearly", "indicate"}));
}

TEST(Tokenize, EmptyLine) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t ").empty());
}

TEST(Tokenize, PunctuationSplitsAtEdgesOnly) {
  EXPECT_EQ(tokenize("state-of-the-art."), (Tokens{"state-of-the-art", "."}));
  EXPECT_EQ(tokenize("(don't)"), (Tokens{"(", "don't", ")"}));
  EXPECT_EQ(tokenize("\"yes,\" he said..."), (Tokens{"\"", "yes", ",", "\"", "he", "said", ".", ".", "."}));
  EXPECT_EQ(tokenize("!!"), (Tokens{"!", "!"}));
}

TEST(Tokenize, LinesGiveOneSequenceEach) {
  std::istringstream in("A b.\n\nC\n");
  auto s = tokenize_lines(in);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], (Tokens{"a", "b", "."}));
  EXPECT_TRUE(s[1].empty());
  EXPECT_EQ(s[2], (Tokens{"c"}));
}

TEST(Vocab, ReservedTokensComeFirst) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.word_of(kStartId), "<start>");
  EXPECT_EQ(v.word_of(kStopId), "<stop>");
  EXPECT_EQ(v.word_of(kUnkId), "<unk>");
  EXPECT_EQ(v.id_of("anything"), kUnkId);
}

TEST(Vocab, TopByCount) {
  std::vector<Tokens> corpus = {{"a", "a", "a", "b", "b", "c"}};
  auto v = build_vocab(corpus, 2);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id_of("a"), 3);
  EXPECT_EQ(v.id_of("b"), 4);
  EXPECT_FALSE(v.contains("c"));
}

TEST(Vocab, TiesBreakLexicographically) {
  std::vector<Tokens> corpus = {{"b", "a", "b", "a"}};
  auto v = build_vocab(corpus, 1);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"a"}));
}

TEST(Vocab, EmptyCorpusHasOnlyReserved) {
  std::vector<Tokens> corpus;
  EXPECT_EQ(build_vocab(corpus, 10).size(), 3u);
}

TEST(Vocab, MatchesCountingOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 12);
  std::geometric_distribution<int> word_idx(0.05);
  std::vector<Tokens> corpus;
  for (int s = 0; s < 1000; ++s) {
    Tokens t;
    for (int i = len(rng); i > 0; --i) t.push_back("w" + std::to_string(word_idx(rng)));
    corpus.push_back(t);
  }
  auto v = build_vocab(corpus, 50);
  ASSERT_EQ(v.size(), 53u);

  auto counts = oracle::count_words(corpus);
  WordCounter counter;
  for (const auto& s : corpus) counter.add(s);
  EXPECT_EQ(counter.counts().size(), counts.size());
  for (const auto& [w, c] : counts) EXPECT_EQ(counter.counts().at(w), c) << w;

  // Every kept word outranks every dropped word under (count desc, word asc).
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& [w, c] : counts) ranked.push_back({c, w});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(v.id_of(ranked[i].second), static_cast<WordId>(i + 3));
  }
}

TEST(Vocab, CounterMergeIsSplitInvariant) {
  std::vector<Tokens> corpus = {{"x", "y"}, {"y", "z", "z"}, {"x"}};
  WordCounter whole, a, b;
  for (const auto& s : corpus) whole.add(s);
  a.add(corpus[0]);
  b.add(corpus[1]);
  b.add(corpus[2]);
  a.merge(b);
  EXPECT_EQ(a.counts(), whole.counts());
  EXPECT_EQ(a.to_vocabulary(10), whole.to_vocabulary(10));
}

TEST(Vocab, FileRoundTrip) {
  std::vector<Tokens> corpus = {{"one", "two", "two", "three"}};
  auto v = build_vocab(corpus, 10);
  std::stringstream buf;
  write_vocab(v, buf);
  EXPECT_EQ(read_vocab(buf), v);
}

TEST(Vocab, RejectsBadWordLists) {
  std::vector<std::string> dup = {"a", "a"};
  EXPECT_THROW(Vocabulary::from_words(dup), FormatError);
  std::vector<std::string> reserved = {"<unk>"};
  EXPECT_THROW(Vocabulary::from_words(reserved), FormatError);
  std::vector<std::string> upper = {"Word"};
  EXPECT_THROW(Vocabulary::from_words(upper), FormatError);
}

TEST(Encode, OovBecomesUnk) {
  std::vector<std::string> words = {"a"};
  auto v = Vocabulary::from_words(words);
  Tokens s = {"a", "zzz"};
  auto e = encode(s, v);
  EXPECT_EQ(e.ids, (std::vector<WordId>{kStartId, 3, kUnkId, kStopId}));
  EXPECT_EQ(e.real_len, 2u);
  EXPECT_EQ(decode(e, v), (Tokens{"a", "<unk>"}));
}

TEST(Encode, EmptySentence) {
  Vocabulary v;
  Tokens s;
  auto e = encode(s, v);
  EXPECT_EQ(e.ids, (std::vector<WordId>{kStartId, kStopId}));
  EXPECT_EQ(e.real_len, 0u);
}

TEST(Encode, LengthLimit) {
  Vocabulary v;
  Tokens forty(40, "w");
  Tokens forty_one(41, "w");
  EXPECT_NO_THROW(encode(forty, v));
  EXPECT_THROW(encode(forty_one, v), RejectedError);

  std::vector<Tokens> corpus = {forty, forty_one, {"a"}};
  EncodeStats stats;
  auto enc = encode_corpus(corpus, v, 40, &stats);
  EXPECT_EQ(enc.size(), 2u);
  EXPECT_EQ(stats.kept, 2u);
  EXPECT_EQ(stats.rejected_too_long, 1u);
}

namespace {

std::vector<EncodedSentence> numbered(std::size_t n, std::size_t max_len = 9) {
  std::vector<Tokens> corpus;
  for (std::size_t i = 0; i < n; ++i) corpus.push_back(Tokens(1 + i % max_len, "w"));
  std::vector<Tokens> vocab_src = {{"w"}};
  return encode_corpus(corpus, build_vocab(vocab_src), 40);
}

}  // namespace

TEST(Batching, SizesAndFinalPartialBatch) {
  auto sents = numbered(250);
  auto batches = make_batches(sents, 100, 1);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].rows.size(), 100u);
  EXPECT_EQ(batches[1].rows.size(), 100u);
  EXPECT_EQ(batches[2].rows.size(), 50u);
}

TEST(Batching, StochasticStream) {
  auto sents = numbered(7);
  auto batches = make_batches(sents, 1, 3);
  ASSERT_EQ(batches.size(), 7u);
  for (const auto& b : batches) EXPECT_EQ(b.rows.size(), 1u);
}

TEST(Batching, SameSeedSameSequence) {
  auto sents = numbered(250);
  auto a = make_batches(sents, 32, 5);
  auto b = make_batches(sents, 32, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rows, b[i].rows);
    EXPECT_EQ(a[i].mask, b[i].mask);
  }
}

TEST(Batching, MaskMarksExactlyRealWords) {
  auto sents = numbered(250);
  std::size_t real = 0;
  for (const auto& s : sents) real += s.real_len;
  std::size_t masked = 0;
  for (const auto& b : make_batches(sents, 64, 9)) {
    masked += b.target_count();
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      const auto& row = b.rows[r];
      EXPECT_EQ(row.ids.size(), b.padded_len());
      EXPECT_EQ(row.ids[row.stop_position()], kStopId);
      for (std::size_t p = 0; p < row.ids.size(); ++p) {
        EXPECT_EQ(b.mask[r][p], p >= 1 && p <= row.real_len);
        if (p > row.stop_position()) EXPECT_EQ(row.ids[p], kFillId);
      }
    }
  }
  EXPECT_EQ(masked, real);
}

TEST(Marked, FindsTarget) {
  auto m = parse_marked("The results clearly *indicate* that ours works.");
  EXPECT_EQ(m.tokens, (Tokens{"the", "results", "clearly", "indicate", "that", "ours", "works", "."}));
  EXPECT_EQ(m.target_index, 3u);
}

TEST(Marked, TrailingPunctuationAfterMark) {
  auto m = parse_marked("it *works*.");
  EXPECT_EQ(m.tokens, (Tokens{"it", "works", "."}));
  EXPECT_EQ(m.target_index, 1u);
}

TEST(Marked, RequiresExactlyOne) {
  EXPECT_THROW(parse_marked("no marks here"), RejectedError);
  EXPECT_THROW(parse_marked("*two* *marks*"), RejectedError);
  EXPECT_THROW(parse_marked("empty ** mark"), RejectedError);
}
