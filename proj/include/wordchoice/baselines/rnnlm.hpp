#pragma once

// Unidirectional LSTM language models used as baselines. A left-to-right
// model predicts the word at position i from positions 0..i-1; a
// right-to-left model predicts it from positions n+1 down to i+1.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/numkernel.hpp"
#include "wordchoice/suggestion.hpp"
#include "wordchoice/training.hpp"

namespace wordchoice::baselines {

enum class Direction { kLeftToRight, kRightToLeft };

inline std::string_view to_string(Direction d) {
  return d == Direction::kLeftToRight ? "left-to-right" : "right-to-left";
}

inline Direction parse_direction(std::string_view s) {
  if (s == "left-to-right" || s == "l2r") return Direction::kLeftToRight;
  if (s == "right-to-left" || s == "r2l") return Direction::kRightToLeft;
  throw FormatError("unknown direction: " + std::string(s));
}

struct RnnLmParams {
  nk::Matrix embed;  // vocab x embed_dim
  nk::LstmParams lstm;
  nk::LinearParams out;  // vocab x hidden

  RnnLmParams() = default;
  RnnLmParams(std::size_t vocab, const Hyperparams& h)
      : embed(vocab, h.embed_dim), lstm(h.embed_dim, h.hidden, h.coupled_gates), out(vocab, h.hidden) {}

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(std::string("embed"), self.embed);
    self.lstm.for_each_tensor("lstm.", f);
    self.out.for_each_tensor("out.", f);
  }
  template <class F> void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F> void for_each_tensor(F&& f) const { visit(*this, f); }
};

struct RnnLm {
  Direction direction = Direction::kLeftToRight;
  Hyperparams hyper;
  corpus::Vocabulary vocab;
  RnnLmParams params;

  void validate() const {
    const std::size_t v = vocab.size();
    if (params.embed.rows() != v || params.embed.cols() != hyper.embed_dim) {
      throw DimensionError("embed shape does not match vocabulary/embed_dim");
    }
    if (params.out.W.rows() != v || params.out.W.cols() != hyper.hidden) {
      throw DimensionError("out.W shape does not match vocabulary/hidden");
    }
    if (params.lstm.hidden_size() != hyper.hidden || params.lstm.input_size() != hyper.embed_dim) {
      throw DimensionError("lstm shape does not match hyperparameters");
    }
    params.lstm.validate();
    params.out.validate();
  }
};

inline RnnLm init_rnnlm(corpus::Vocabulary vocab, const Hyperparams& hyper, Direction dir) {
  hyper.validate();
  RnnLm m{dir, hyper, std::move(vocab), {}};
  m.params = RnnLmParams(m.vocab.size(), hyper);
  std::mt19937_64 rng(hyper.seed);
  m.params.for_each_tensor([&](const std::string& name, nk::Matrix& t) {
    const bool bias = name.find(".b") != std::string::npos;
    const bool output = name.rfind("out.", 0) == 0;
    if (!bias && !output) nk::glorot_uniform(t, rng);
  });
  return m;
}

// Hidden state that conditions the prediction at `pos`.
inline nk::Vector rnnlm_state(const RnnLm& model, const corpus::EncodedSentence& sent,
                              std::size_t pos) {
  if (pos == 0 || pos > sent.real_len) {
    throw RejectedError("target position " + std::to_string(pos) + " is not a real word");
  }
  nk::LstmState s = nk::LstmState::zeros(model.hyper.hidden);
  auto step = [&](std::size_t t) {
    s = nk::lstm_step(model.params.lstm, model.params.embed.row(static_cast<std::size_t>(sent.ids[t])), s);
  };
  if (model.direction == Direction::kLeftToRight) {
    for (std::size_t t = 0; t < pos; ++t) step(t);
  } else {
    for (std::size_t t = sent.stop_position(); t > pos; --t) step(t);
  }
  return s.h;
}

inline nk::Vector rnnlm_distribution(const RnnLm& model, const corpus::EncodedSentence& sent,
                                     std::size_t pos) {
  return nk::softmax(nk::linear(model.params.out, rnnlm_state(model, sent, pos)));
}

inline std::vector<nk::Tape::Var> record_rnnlm_row(Direction dir, nk::Tape& tape, const RnnLmParams& p,
                                                   RnnLmParams& g, const corpus::EncodedSentence& row,
                                                   const std::vector<bool>& mask) {
  std::vector<nk::Tape::Var> losses;
  if (row.real_len == 0) return losses;
  const std::size_t stop = row.stop_position();
  const std::size_t hs = p.lstm.hidden_size();
  nk::Tape::Var h = tape.constant(nk::Vector(hs, 0.0));
  nk::Tape::Var c = tape.constant(nk::Vector(hs, 0.0));
  auto step = [&](std::size_t t) {
    auto x = tape.lookup(p.embed, g.embed, static_cast<std::size_t>(row.ids[t]));
    std::tie(h, c) = tape.lstm(p.lstm, g.lstm, x, h, c);
  };
  auto predict = [&](std::size_t pos) {
    if (pos < mask.size() && mask[pos]) {
      auto z = tape.linear(p.out, g.out, h);
      losses.push_back(tape.softmax_xent(z, static_cast<std::size_t>(row.ids[pos])));
    }
  };
  if (dir == Direction::kLeftToRight) {
    for (std::size_t t = 0; t + 1 < stop; ++t) {
      step(t);
      predict(t + 1);
    }
  } else {
    for (std::size_t t = stop; t > 1; --t) {
      step(t);
      predict(t - 1);
    }
  }
  return losses;
}

// Same masking, batching and SGD contract as the bidirectional trainer.
inline TrainLog train_rnnlm(RnnLm& model, std::span<const corpus::EncodedSentence> sentences,
                            const TrainOptions& options = {}) {
  model.validate();
  const Direction dir = model.direction;
  RowLossRecorder<RnnLmParams> rec = [dir](nk::Tape& tape, const RnnLmParams& p, RnnLmParams& g,
                                           const corpus::EncodedSentence& row,
                                           const std::vector<bool>& mask) {
    return record_rnnlm_row(dir, tape, p, g, row, mask);
  };
  return train_masked(model.params, sentences, model.hyper, rec, options);
}

inline RnnLm rnnlm_train(std::span<const corpus::EncodedSentence> sentences, corpus::Vocabulary vocab,
                         const Hyperparams& hyper, Direction dir, TrainLog* log = nullptr,
                         const TrainOptions& options = {}) {
  RnnLm model = init_rnnlm(std::move(vocab), hyper, dir);
  TrainLog l = train_rnnlm(model, sentences, options);
  if (log != nullptr) *log = std::move(l);
  return model;
}

inline SuggestionList rnnlm_rank(const RnnLm& model, const corpus::EncodedSentence& sent,
                                 std::size_t pos, std::size_t k) {
  if (k < 1) throw RejectedError("k must be at least 1");
  return top_k(rnnlm_distribution(model, sent, pos), model.vocab, k);
}

// Summed cross-entropy over real words.
inline double rnnlm_sentence_loss(const RnnLm& model, const corpus::EncodedSentence& sent) {
  double loss = 0.0;
  for (std::size_t pos = 1; pos <= sent.real_len; ++pos) {
    nk::Vector z = nk::linear(model.params.out, rnnlm_state(model, sent, pos));
    loss += nk::softmax_cross_entropy(z, static_cast<std::size_t>(sent.ids[pos]));
  }
  return loss;
}

}  // namespace wordchoice::baselines
