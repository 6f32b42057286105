#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wordchoice/corpus.hpp"

namespace wordchoice {

// One ranked replacement candidate. `score` is a probability for the
// neural rankers and the negative log perplexity for the n-gram ranker;
// higher is always better.
struct Suggestion {
  std::string word;
  double score = 0.0;
  corpus::WordId id = corpus::kUnkId;

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

using SuggestionList = std::vector<Suggestion>;

// Top-k non-reserved entries of `scores` (indexed by word id), by score
// descending with ties broken by ascending id.
inline SuggestionList top_k(std::span<const double> scores, const corpus::Vocabulary& vocab,
                            std::size_t k) {
  std::vector<corpus::WordId> ids;
  ids.reserve(scores.size());
  for (std::size_t id = corpus::kNumReserved; id < scores.size(); ++id) {
    ids.push_back(static_cast<corpus::WordId>(id));
  }
  const std::size_t keep = std::min(k, ids.size());
  auto better = [&](corpus::WordId a, corpus::WordId b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), better);
  SuggestionList out;
  out.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    out.push_back({vocab.word_of(ids[r]), scores[static_cast<std::size_t>(ids[r])], ids[r]});
  }
  return out;
}

inline SuggestionList truncate(SuggestionList list, std::size_t k) {
  if (list.size() > k) list.resize(k);
  return list;
}

}  // namespace wordchoice
