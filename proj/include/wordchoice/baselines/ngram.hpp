#pragma once

// Interpolated modified Kneser-Ney n-gram language model.
//
// Sentences are padded with (order - 1) <start> symbols and end with a
// predicted <stop> event. For an n-gram g of order k:
//
//   a(g) = c(g)                          if k == order or g starts with <start>
//   a(g) = |{v : c(v g) > 0}|            otherwise (continuation count)
//
// Per order k, with n_j the number of k-grams whose a(g) == j:
//
//   Y  = n1 / (n1 + 2 n2)
//   D1 = 1 - 2 Y n2 / n1,  D2 = 2 - 3 Y n3 / n2,  D3+ = 3 - 4 Y n4 / n3
//
// A discount D_j whose formula divides by zero or falls outside (0, j) is
// replaced by j / 2. For context h of length k - 1 with
// T(h) = sum_w a(h w) > 0 and N_j(h) the number of w with a(h w) == j
// (j = 1, 2, 3+):
//
//   p_k(w | h) = max(a(h w) - D(a(h w)), 0) / T(h) + gamma(h) p_{k-1}(w | h')
//   gamma(h)   = (D1 N1(h) + D2 N2(h) + D3+ N3+(h)) / T(h)
//
// where h' drops the first word of h. If T(h) == 0 the model backs off
// entirely: p_k(w | h) = p_{k-1}(w | h'). The recursion ends at
// p_0(w) = 1 / |V| over every vocabulary entry except <start>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/suggestion.hpp"

namespace wordchoice::baselines {

using NGram = std::vector<corpus::WordId>;

struct Discounts {
  double d1 = 0.5;
  double d2 = 1.0;
  double d3 = 1.5;

  double for_count(std::uint64_t a) const {
    if (a == 0) return 0.0;
    if (a == 1) return d1;
    if (a == 2) return d2;
    return d3;
  }
};

// Count-of-counts n1..n4 to discounts, with the j/2 fallback.
inline Discounts estimate_discounts(std::uint64_t n1, std::uint64_t n2, std::uint64_t n3,
                                    std::uint64_t n4) {
  Discounts d;
  const double y = (n1 + 2 * n2) > 0 ? static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2) : 0.0;
  auto pick = [](bool defined, double value, double j) {
    return defined && value > 0.0 && value < j ? value : j / 2.0;
  };
  d.d1 = pick(n1 > 0, 1.0 - 2.0 * y * static_cast<double>(n2) / static_cast<double>(n1 ? n1 : 1), 1.0);
  d.d2 = pick(n2 > 0, 2.0 - 3.0 * y * static_cast<double>(n3) / static_cast<double>(n2 ? n2 : 1), 2.0);
  d.d3 = pick(n3 > 0, 3.0 - 4.0 * y * static_cast<double>(n4) / static_cast<double>(n3 ? n3 : 1), 3.0);
  return d;
}

struct ContextStats {
  std::uint64_t total = 0;
  std::uint64_t n1 = 0;
  std::uint64_t n2 = 0;
  std::uint64_t n3plus = 0;
};

class NGramTable {
 public:
  NGramTable() = default;

  // Builds every derived statistic from raw counts.
  NGramTable(std::size_t order, corpus::Vocabulary vocab, std::vector<std::map<NGram, std::uint64_t>> raw,
             std::vector<Discounts> discounts)
      : order_(order), vocab_(std::move(vocab)), raw_(std::move(raw)), discounts_(std::move(discounts)) {
    derive();
  }

  std::size_t order() const { return order_; }
  const corpus::Vocabulary& vocab() const { return vocab_; }
  const std::vector<Discounts>& discounts() const { return discounts_; }
  // Raw counts of k-grams, k = 1..order.
  const std::map<NGram, std::uint64_t>& raw_counts(std::size_t k) const { return raw_.at(k - 1); }
  std::uint64_t adjusted_count(const NGram& g) const {
    const auto& m = adjusted_.at(g.size() - 1);
    auto it = m.find(g);
    return it == m.end() ? 0 : it->second;
  }

  // Size of the predictable vocabulary (everything except <start>).
  std::size_t event_vocab_size() const { return vocab_.size() - 1; }

  // p(w | context); only the last order-1 context words are used and
  // shorter contexts are not padded.
  double prob(std::span<const corpus::WordId> context, corpus::WordId w) const {
    const std::size_t use = std::min(context.size(), order_ - 1);
    return prob_at(context.subspan(context.size() - use), w);
  }

  double log_prob(std::span<const corpus::WordId> context, corpus::WordId w) const {
    return std::log(prob(context, w));
  }

 private:
  double prob_at(std::span<const corpus::WordId> h, corpus::WordId w) const {
    const double lower = h.empty() ? 1.0 / static_cast<double>(event_vocab_size())
                                   : prob_at(h.subspan(1), w);
    const std::size_t k = h.size() + 1;
    const auto& ctx = contexts_[k - 1];
    auto it = ctx.find(NGram(h.begin(), h.end()));
    if (it == ctx.end() || it->second.total == 0) return lower;
    const ContextStats& s = it->second;
    NGram g(h.begin(), h.end());
    g.push_back(w);
    const std::uint64_t a = adjusted_count(g);
    const Discounts& d = discounts_[k - 1];
    const double total = static_cast<double>(s.total);
    const double kept = std::max(static_cast<double>(a) - d.for_count(a), 0.0) / total;
    const double gamma = (d.d1 * static_cast<double>(s.n1) + d.d2 * static_cast<double>(s.n2) +
                          d.d3 * static_cast<double>(s.n3plus)) / total;
    return kept + gamma * lower;
  }

  void derive() {
    adjusted_.assign(order_, {});
    contexts_.assign(order_, {});
    for (std::size_t k = 1; k <= order_; ++k) {
      auto& adj = adjusted_[k - 1];
      if (k == order_) {
        adj = raw_[k - 1];
      } else {
        for (const auto& [g, c] : raw_[k - 1]) {
          if (g.front() == corpus::kStartId) adj[g] = c;
        }
        for (const auto& [g, c] : raw_[k]) {
          NGram tail(g.begin() + 1, g.end());
          if (tail.front() != corpus::kStartId) ++adj[tail];
        }
      }
      for (const auto& [g, a] : adj) {
        ContextStats& s = contexts_[k - 1][NGram(g.begin(), g.end() - 1)];
        s.total += a;
        if (a == 1) ++s.n1;
        else if (a == 2) ++s.n2;
        else if (a >= 3) ++s.n3plus;
      }
    }
  }

  std::size_t order_ = 0;
  corpus::Vocabulary vocab_;
  std::vector<std::map<NGram, std::uint64_t>> raw_;
  std::vector<Discounts> discounts_;
  std::vector<std::map<NGram, std::uint64_t>> adjusted_;
  std::vector<std::map<NGram, ContextStats>> contexts_;
};

// Padded id sequence: (order - 1) <start>, words, <stop>.
inline std::vector<corpus::WordId> pad_for_ngrams(const corpus::EncodedSentence& sent, std::size_t order) {
  std::vector<corpus::WordId> seq(order - 1, corpus::kStartId);
  for (std::size_t i = 0; i < sent.real_len; ++i) seq.push_back(sent.ids[i + 1]);
  seq.push_back(corpus::kStopId);
  return seq;
}

inline NGramTable ngram_train(std::span<const corpus::EncodedSentence> corpus_sents,
                              const corpus::Vocabulary& vocab, std::size_t order = 5) {
  if (order < 1) throw DimensionError("n-gram order must be at least 1");
  if (corpus_sents.empty()) throw RejectedError("cannot train an n-gram model on an empty corpus");
  std::vector<std::map<NGram, std::uint64_t>> raw(order);
  for (const auto& sent : corpus_sents) {
    auto seq = pad_for_ngrams(sent, order);
    for (std::size_t e = order - 1; e < seq.size(); ++e) {
      for (std::size_t k = 1; k <= order; ++k) {
        ++raw[k - 1][NGram(seq.begin() + static_cast<std::ptrdiff_t>(e + 1 - k),
                           seq.begin() + static_cast<std::ptrdiff_t>(e + 1))];
      }
    }
  }
  // Discounts depend on adjusted counts: derive with placeholders first.
  NGramTable provisional(order, vocab, raw, std::vector<Discounts>(order));
  std::vector<Discounts> discounts;
  for (std::size_t k = 1; k <= order; ++k) {
    std::uint64_t n[5] = {0, 0, 0, 0, 0};
    for (const auto& [g, c] : provisional.raw_counts(k)) {
      (void)c;
      const std::uint64_t a = provisional.adjusted_count(g);
      if (a >= 1 && a <= 4) ++n[a];
    }
    discounts.push_back(estimate_discounts(n[1], n[2], n[3], n[4]));
  }
  return NGramTable(order, vocab, std::move(raw), std::move(discounts));
}

// Tokenized-corpus convenience: builds an uncapped vocabulary first.
inline NGramTable ngram_train(std::span<const corpus::Tokens> sentences, std::size_t order = 5,
                              std::size_t max_vocab = std::numeric_limits<std::size_t>::max()) {
  corpus::Vocabulary vocab = corpus::build_vocab(sentences, max_vocab);
  auto enc = corpus::encode_corpus(sentences, vocab, std::numeric_limits<std::size_t>::max());
  return ngram_train(enc, vocab, order);
}

// Log probabilities of the real_len + 1 events of a sentence.
inline std::vector<double> event_log_probs(const NGramTable& table, const corpus::EncodedSentence& sent) {
  const std::size_t order = table.order();
  auto seq = pad_for_ngrams(sent, order);
  std::vector<double> out;
  for (std::size_t e = order - 1; e < seq.size(); ++e) {
    std::span<const corpus::WordId> ctx(seq.data() + e - (order - 1), order - 1);
    out.push_back(table.log_prob(ctx, seq[e]));
  }
  return out;
}

inline double perplexity_from_log_probs(std::span<const double> log_probs) {
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return std::exp(-s / static_cast<double>(log_probs.size()));
}

inline double sentence_perplexity(const NGramTable& table, const corpus::EncodedSentence& sent) {
  return perplexity_from_log_probs(event_log_probs(table, sent));
}

// Ranks candidates for the slot at `pos` by ascending whole-sentence
// perplexity; score is -log(perplexity). OOV candidates are scored as
// <unk>. Ties keep vocabulary-id order.
inline SuggestionList ngram_rank(const NGramTable& table, const corpus::EncodedSentence& sent,
                                 std::size_t pos, std::span<const std::string> candidates) {
  if (pos == 0 || pos > sent.real_len) {
    throw RejectedError("target position " + std::to_string(pos) + " is not a real word");
  }
  SuggestionList out;
  corpus::EncodedSentence probe = sent;
  for (const std::string& cand : candidates) {
    const corpus::WordId id = table.vocab().id_of(corpus::to_lower(cand));
    probe.ids[pos] = id;
    out.push_back({cand, -std::log(sentence_perplexity(table, probe)), id});
  }
  std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

// Text form: a header block (order, per-order discounts, vocabulary in id
// order) followed by `order<TAB>ngram<TAB>count` lines sorted by order and
// then by n-gram text.
inline void write_ngram_table(const NGramTable& table, std::ostream& out) {
  out << "#wordchoice-ngram\t1\n";
  out << "order\t" << table.order() << '\n';
  out << std::setprecision(17);
  for (std::size_t k = 1; k <= table.order(); ++k) {
    const Discounts& d = table.discounts()[k - 1];
    out << "discount\t" << k << '\t' << d.d1 << '\t' << d.d2 << '\t' << d.d3 << '\n';
  }
  for (const std::string& w : table.vocab().words()) out << "vocab\t" << w << '\n';
  out << "counts\n";
  for (std::size_t k = 1; k <= table.order(); ++k) {
    std::vector<std::pair<std::string, std::uint64_t>> lines;
    for (const auto& [g, c] : table.raw_counts(k)) {
      std::string text;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) text += ' ';
        text += table.vocab().word_of(g[i]);
      }
      lines.emplace_back(std::move(text), c);
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& [text, c] : lines) out << k << '\t' << text << '\t' << c << '\n';
  }
}

inline NGramTable read_ngram_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError("n-gram table line " + std::to_string(line_no) + ": " + why);
  };
  auto split_tabs = [](const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == '\t') {
        parts.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    }
    return parts;
  };

  std::size_t order = 0;
  std::vector<Discounts> discounts;
  std::vector<std::string> words;
  bool in_counts = false;
  std::vector<std::map<NGram, std::uint64_t>> raw;
  corpus::Vocabulary vocab;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("#wordchoice-ngram", 0) != 0) fail("missing #wordchoice-ngram header");
      continue;
    }
    auto parts = split_tabs(line);
    try {
      if (!in_counts) {
        if (parts[0] == "order" && parts.size() == 2) {
          order = std::stoul(parts[1]);
          if (order < 1) fail("order must be at least 1");
        } else if (parts[0] == "discount" && parts.size() == 5) {
          discounts.push_back({std::stod(parts[2]), std::stod(parts[3]), std::stod(parts[4])});
        } else if (parts[0] == "vocab" && parts.size() == 2) {
          words.push_back(parts[1]);
        } else if (parts[0] == "counts" && parts.size() == 1) {
          in_counts = true;
          vocab = corpus::Vocabulary::from_words(words);
          raw.assign(order, {});
        } else {
          fail("unrecognized header line");
        }
        continue;
      }
      if (parts.size() != 3) fail("expected order<TAB>ngram<TAB>count");
      const std::size_t k = std::stoul(parts[0]);
      if (k < 1 || k > order) fail("n-gram order out of range");
      NGram g;
      for (std::string_view w : corpus::split_whitespace(parts[1])) {
        if (!vocab.contains(w)) fail("n-gram word not in vocabulary: " + std::string(w));
        g.push_back(vocab.id_of(w));
      }
      if (g.size() != k) fail("n-gram length does not match its order");
      raw[k - 1][g] = std::stoull(parts[2]);
    } catch (const std::logic_error&) {
      fail("malformed number");
    }
  }
  if (!in_counts) fail("missing counts section");
  if (discounts.size() != order) fail("expected one discount line per order");
  return NGramTable(order, std::move(vocab), std::move(raw), std::move(discounts));
}

inline void save_ngram_table(const NGramTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_ngram_table(table, out);
}

inline NGramTable load_ngram_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_ngram_table(in);
}

}  // namespace wordchoice::baselines
