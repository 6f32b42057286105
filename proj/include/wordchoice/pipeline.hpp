#pragma once

// Glue between models, the POS filter and the evaluation harness.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "wordchoice/baselines/ngram.hpp"
#include "wordchoice/baselines/rnnlm.hpp"
#include "wordchoice/bilstm.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/eval.hpp"
#include "wordchoice/posfilter.hpp"
#include "wordchoice/suggestion.hpp"

namespace wordchoice {

inline constexpr std::size_t kAllCandidates = std::numeric_limits<std::size_t>::max();

// Suggestion pipeline: rank with the model, keep the top `pool` words,
// filter by POS (if a lexicon is given) and cut to k.
struct PipelineResult {
  SuggestionList suggestions;
  bool pos_bypassed = false;
};

inline PipelineResult suggest_pipeline(const BiLstmModel& model, const pos::Lexicon* lexicon,
                                       const corpus::Tokens& tokens, std::size_t target_index,
                                       std::size_t k, std::size_t pool = 100) {
  auto sent = corpus::encode(tokens, model.vocab, model.hyper.max_len);
  PipelineResult out;
  out.suggestions = suggest(model, sent, corpus::EncodedSentence::position_of(target_index), pool);
  if (lexicon != nullptr) {
    auto filtered = pos::filter_candidates(*lexicon, tokens.at(target_index), out.suggestions);
    out.suggestions = std::move(filtered.kept);
    out.pos_bypassed = filtered.bypassed;
  }
  out.suggestions = truncate(std::move(out.suggestions), k);
  return out;
}

inline eval::Ranker bilstm_ranker(const BiLstmModel& model) {
  return [&model](const corpus::Tokens& tokens, std::size_t target) {
    auto sent = corpus::encode(tokens, model.vocab, model.hyper.max_len);
    return suggest(model, sent, corpus::EncodedSentence::position_of(target), kAllCandidates);
  };
}

inline eval::Ranker rnnlm_ranker(const baselines::RnnLm& model) {
  return [&model](const corpus::Tokens& tokens, std::size_t target) {
    auto sent = corpus::encode(tokens, model.vocab, model.hyper.max_len);
    return baselines::rnnlm_rank(model, sent, corpus::EncodedSentence::position_of(target),
                                 kAllCandidates);
  };
}

// Every non-reserved vocabulary word is a candidate.
inline eval::Ranker ngram_ranker(const baselines::NGramTable& table) {
  return [&table, words = table.vocab().words()](const corpus::Tokens& tokens, std::size_t target) {
    auto sent = corpus::encode(tokens, table.vocab(), std::numeric_limits<std::size_t>::max());
    return baselines::ngram_rank(table, sent, corpus::EncodedSentence::position_of(target), words);
  };
}

}  // namespace wordchoice
