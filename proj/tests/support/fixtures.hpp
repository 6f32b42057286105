#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "wordchoice/bilstm.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/hyperparams.hpp"

namespace fixtures {

using namespace wordchoice;

// Vocabulary of `total` entries: the reserved three plus v0, v1, ...
inline corpus::Vocabulary numbered_vocab(std::size_t total) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i + corpus::kNumReserved < total; ++i) words.push_back("v" + std::to_string(i));
  return corpus::Vocabulary::from_words(words);
}

inline Hyperparams tiny_hyper(std::size_t dims, std::uint64_t seed = 7) {
  Hyperparams h;
  h.embed_dim = dims;
  h.hidden = dims;
  h.batch_size = 4;
  h.epochs = 1;
  h.seed = seed;
  return h;
}

// Model with every tensor, output layer included, drawn at random.
inline BiLstmModel random_model(std::size_t vocab_total, std::size_t dims, std::uint64_t seed,
                                bool coupled = false) {
  Hyperparams h = tiny_hyper(dims, seed);
  h.coupled_gates = coupled;
  BiLstmModel m = init_bilstm(numbered_vocab(vocab_total), h);
  oracle::randomize(m.params, seed + 1);
  return m;
}

inline corpus::EncodedSentence random_sentence(std::size_t len, std::size_t vocab_total, std::mt19937_64& rng) {
  std::uniform_int_distribution<corpus::WordId> pick(corpus::kNumReserved,
                                                      static_cast<corpus::WordId>(vocab_total - 1));
  corpus::EncodedSentence s;
  s.real_len = len;
  s.ids.push_back(corpus::kStartId);
  for (std::size_t i = 0; i < len; ++i) s.ids.push_back(pick(rng));
  s.ids.push_back(corpus::kStopId);
  return s;
}

// d(sentence_loss)/d(params) from the tape.
inline BiLstmParams tape_gradients(const BiLstmModel& m, const corpus::EncodedSentence& sent) {
  BiLstmParams g = zeros_like(m.params);
  nk::Tape tape;
  auto losses = record_bilstm_row(tape, m.params, g, sent, corpus::real_word_mask(sent));
  tape.backward(tape.weighted_sum(losses, 1.0));
  return g;
}

}  // namespace fixtures
