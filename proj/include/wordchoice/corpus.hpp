#pragma once

// Tokenization, vocabulary construction, encoding and padded batching of
// line-delimited training text.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wordchoice/error.hpp"

namespace wordchoice::corpus {

using WordId = std::int32_t;
using Tokens = std::vector<std::string>;

inline constexpr WordId kStartId = 0;
inline constexpr WordId kStopId = 1;
inline constexpr WordId kUnkId = 2;
inline constexpr WordId kNumReserved = 3;
// Batch rows are padded with <stop>; only the mask says what is real.
inline constexpr WordId kFillId = kStopId;

inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kStopToken = "<stop>";
inline constexpr std::string_view kUnkToken = "<unk>";

inline constexpr std::size_t kDefaultMaxVocab = 30000;
inline constexpr std::size_t kDefaultMaxSentenceLen = 40;

inline bool is_reserved(std::string_view word) {
  return word == kStartToken || word == kStopToken || word == kUnkToken;
}

inline bool is_reserved(WordId id) { return id >= 0 && id < kNumReserved; }

// ASCII lowercasing; bytes outside ASCII pass through untouched.
inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

inline bool is_ascii_punct(char ch) {
  return std::ispunct(static_cast<unsigned char>(ch)) != 0;
}

// Splits one whitespace-delimited chunk. Leading and trailing ASCII
// punctuation characters each become their own token; everything between
// them (including internal hyphens and apostrophes) stays one token.
inline void tokenize_chunk(std::string_view chunk, Tokens& out) {
  std::size_t begin = 0;
  std::size_t end = chunk.size();
  while (begin < end && is_ascii_punct(chunk[begin])) {
    out.emplace_back(1, chunk[begin]);
    ++begin;
  }
  std::size_t trail = end;
  while (trail > begin && is_ascii_punct(chunk[trail - 1])) --trail;
  if (trail > begin) out.push_back(to_lower(chunk.substr(begin, trail - begin)));
  for (std::size_t i = trail; i < end; ++i) out.emplace_back(1, chunk[i]);
}

inline std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) chunks.push_back(text.substr(i, j - i));
    i = j;
  }
  return chunks;
}

// Tokenizes a single sentence (one line of text).
inline Tokens tokenize(std::string_view line) {
  Tokens out;
  for (std::string_view chunk : split_whitespace(line)) tokenize_chunk(chunk, out);
  return out;
}

// One token sequence per input line.
inline std::vector<Tokens> tokenize_lines(std::istream& in) {
  std::vector<Tokens> sentences;
  std::string line;
  while (std::getline(in, line)) sentences.push_back(tokenize(line));
  return sentences;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (std::string_view w : {kStartToken, kStopToken, kUnkToken}) {
      add_unchecked(std::string(w));
    }
  }

  // Builds from an explicit list of non-reserved words in id order
  // (ids start at 3). Duplicates and reserved words are rejected.
  static Vocabulary from_words(std::span<const std::string> words) {
    Vocabulary vocab;
    for (const std::string& w : words) {
      if (is_reserved(w)) throw FormatError("reserved token in word list: " + w);
      if (w != to_lower(w)) throw FormatError("vocabulary word is not lowercase: " + w);
      if (vocab.id_of_.count(w) != 0) throw FormatError("duplicate vocabulary word: " + w);
      vocab.add_unchecked(w);
    }
    return vocab;
  }

  std::size_t size() const { return word_of_.size(); }

  const std::string& word_of(WordId id) const {
    return word_of_.at(static_cast<std::size_t>(id));
  }

  // Unknown words map to <unk>.
  WordId id_of(std::string_view word) const {
    auto it = id_of_.find(std::string(word));
    return it == id_of_.end() ? kUnkId : it->second;
  }

  bool contains(std::string_view word) const {
    return id_of_.count(std::string(word)) != 0;
  }

  // Non-reserved words in id order.
  std::vector<std::string> words() const {
    return {word_of_.begin() + kNumReserved, word_of_.end()};
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.word_of_ == b.word_of_;
  }

 private:
  void add_unchecked(std::string word) {
    id_of_.emplace(word, static_cast<WordId>(word_of_.size()));
    word_of_.push_back(std::move(word));
  }

  std::vector<std::string> word_of_;
  std::unordered_map<std::string, WordId> id_of_;
};

// Streaming word counter. Counts from separately fed chunks can be merged;
// the result never depends on how the stream was split.
class WordCounter {
 public:
  void add(std::span<const std::string> sentence) {
    for (const std::string& w : sentence) {
      if (!is_reserved(w)) ++counts_[w];
    }
  }

  void merge(const WordCounter& other) {
    for (const auto& [w, c] : other.counts_) counts_[w] += c;
  }

  const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }

  // Top max_vocab words by count, ties broken lexicographically.
  Vocabulary to_vocabulary(std::size_t max_vocab) const {
    if (max_vocab < 1) throw DimensionError("max_vocab must be at least 1");
    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts_.begin(), counts_.end());
    auto by_freq = [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    std::size_t keep = std::min(max_vocab, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                      ranked.end(), by_freq);
    std::vector<std::string> words;
    words.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) words.push_back(to_lower(ranked[i].first));
    // Lowercasing can merge entries only if the input was not lowercased;
    // drop later duplicates in that case.
    std::vector<std::string> unique;
    std::unordered_map<std::string, bool> seen;
    for (auto& w : words) {
      if (seen.emplace(w, true).second) unique.push_back(std::move(w));
    }
    return Vocabulary::from_words(unique);
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
};

inline Vocabulary build_vocab(std::span<const Tokens> corpus,
                              std::size_t max_vocab = kDefaultMaxVocab) {
  WordCounter counter;
  for (const Tokens& s : corpus) counter.add(s);
  return counter.to_vocabulary(max_vocab);
}

// Vocabulary file: one word per line, line n (0-based) holds id n + 3.
inline void write_vocab(const Vocabulary& vocab, std::ostream& out) {
  for (const std::string& w : vocab.words()) out << w << '\n';
}

inline Vocabulary read_vocab(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw FormatError("empty line in vocabulary file at id " +
                                        std::to_string(words.size() + kNumReserved));
    words.push_back(line);
  }
  return Vocabulary::from_words(words);
}

inline Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  return read_vocab(in);
}

struct EncodedSentence {
  std::vector<WordId> ids;  // <start> w1 .. wn <stop> [fill...]
  std::size_t real_len = 0;

  // Position of the i-th real word (0-based) inside ids.
  static constexpr std::size_t position_of(std::size_t word_index) { return word_index + 1; }

  std::size_t stop_position() const { return real_len + 1; }

  friend bool operator==(const EncodedSentence&, const EncodedSentence&) = default;
};

inline EncodedSentence encode(std::span<const std::string> sentence, const Vocabulary& vocab,
                              std::size_t max_sentence_len = kDefaultMaxSentenceLen) {
  if (sentence.size() > max_sentence_len) {
    throw RejectedError("sentence has " + std::to_string(sentence.size()) +
                        " tokens; the limit is " + std::to_string(max_sentence_len));
  }
  EncodedSentence enc;
  enc.real_len = sentence.size();
  enc.ids.reserve(sentence.size() + 2);
  enc.ids.push_back(kStartId);
  for (const std::string& w : sentence) enc.ids.push_back(vocab.id_of(to_lower(w)));
  enc.ids.push_back(kStopId);
  return enc;
}

// Real words only; boundary and fill tokens are dropped.
inline Tokens decode(const EncodedSentence& sent, const Vocabulary& vocab) {
  Tokens out;
  out.reserve(sent.real_len);
  for (std::size_t i = 0; i < sent.real_len; ++i) {
    out.push_back(vocab.word_of(sent.ids[EncodedSentence::position_of(i)]));
  }
  return out;
}

struct EncodeStats {
  std::size_t kept = 0;
  std::size_t rejected_too_long = 0;
};

// Training-side encoding: over-length sentences are skipped and counted.
inline std::vector<EncodedSentence> encode_corpus(std::span<const Tokens> corpus,
                                                  const Vocabulary& vocab,
                                                  std::size_t max_sentence_len,
                                                  EncodeStats* stats = nullptr) {
  std::vector<EncodedSentence> out;
  EncodeStats local;
  for (const Tokens& s : corpus) {
    if (s.size() > max_sentence_len) {
      ++local.rejected_too_long;
      continue;
    }
    out.push_back(encode(s, vocab, max_sentence_len));
    ++local.kept;
  }
  if (stats != nullptr) *stats = local;
  return out;
}

struct Batch {
  std::vector<EncodedSentence> rows;       // equal-length ids
  std::vector<std::vector<bool>> mask;     // true only at real-word positions

  std::size_t padded_len() const { return rows.empty() ? 0 : rows.front().ids.size(); }

  std::size_t target_count() const {
    std::size_t n = 0;
    for (const auto& m : mask) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
    return n;
  }
};

inline std::vector<bool> real_word_mask(const EncodedSentence& row) {
  std::vector<bool> m(row.ids.size(), false);
  for (std::size_t i = 0; i < row.real_len; ++i) m[EncodedSentence::position_of(i)] = true;
  return m;
}

// Pads every row to `len` with the fill id and rebuilds the mask.
inline void pad_batch(Batch& batch, std::size_t len) {
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    auto& ids = batch.rows[r].ids;
    if (ids.size() < len) ids.resize(len, kFillId);
    batch.mask[r] = real_word_mask(batch.rows[r]);
  }
}

inline Batch make_batch(std::span<const EncodedSentence> rows) {
  Batch batch;
  batch.rows.assign(rows.begin(), rows.end());
  batch.mask.resize(rows.size());
  std::size_t len = 0;
  for (const auto& r : rows) len = std::max(len, r.ids.size());
  pad_batch(batch, len);
  return batch;
}

// Shuffles deterministically from `seed`, then cuts into batches of
// `batch_size`; the final partial batch is kept.
inline std::vector<Batch> make_batches(std::span<const EncodedSentence> sentences,
                                       std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw DimensionError("batch_size must be at least 1");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t stop = std::min(order.size(), start + batch_size);
    std::vector<EncodedSentence> rows;
    rows.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) rows.push_back(sentences[order[i]]);
    batches.push_back(make_batch(rows));
  }
  return batches;
}

// A sentence with one target word marked as `*word*`.
struct MarkedSentence {
  Tokens tokens;
  std::size_t target_index = 0;
};

inline MarkedSentence parse_marked(std::string_view text) {
  MarkedSentence out;
  int marked = 0;
  for (std::string_view chunk : split_whitespace(text)) {
    std::size_t first = chunk.find('*');
    std::size_t last = chunk.rfind('*');
    if (first == std::string_view::npos || first == last) {
      tokenize_chunk(chunk, out.tokens);
      continue;
    }
    std::string_view word = chunk.substr(first + 1, last - first - 1);
    if (word.empty()) throw RejectedError("empty marked word in: " + std::string(chunk));
    tokenize_chunk(chunk.substr(0, first), out.tokens);
    out.target_index = out.tokens.size();
    out.tokens.push_back(to_lower(word));
    tokenize_chunk(chunk.substr(last + 1), out.tokens);
    ++marked;
  }
  if (marked != 1) {
    throw RejectedError("expected exactly one *marked* word, found " + std::to_string(marked));
  }
  return out;
}

}  // namespace wordchoice::corpus
