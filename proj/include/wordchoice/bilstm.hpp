#pragma once

// Bidirectional LSTM word-choice model.
//
// For a target at position i of `<start> w1 .. wn <stop>`, the left LSTM
// reads positions 0..i-1 and the right LSTM reads positions n+1 down to
// i+1. Their final hidden states are concatenated (left first), projected
// to vocabulary size and normalized with softmax. Neither direction ever
// reads position i.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/numkernel.hpp"
#include "wordchoice/suggestion.hpp"
#include "wordchoice/training.hpp"

namespace wordchoice {

struct BiLstmParams {
  nk::Matrix embed_left;   // vocab x embed_dim
  nk::Matrix embed_right;  // vocab x embed_dim
  nk::LstmParams lstm_left;
  nk::LstmParams lstm_right;
  nk::LinearParams out;    // vocab x 2*hidden

  BiLstmParams() = default;
  BiLstmParams(std::size_t vocab, const Hyperparams& h)
      : embed_left(vocab, h.embed_dim),
        embed_right(vocab, h.embed_dim),
        lstm_left(h.embed_dim, h.hidden, h.coupled_gates),
        lstm_right(h.embed_dim, h.hidden, h.coupled_gates),
        out(vocab, h.context_dim()) {}

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(std::string("embed_left"), self.embed_left);
    f(std::string("embed_right"), self.embed_right);
    self.lstm_left.for_each_tensor("lstm_left.", f);
    self.lstm_right.for_each_tensor("lstm_right.", f);
    self.out.for_each_tensor("out.", f);
  }
  template <class F> void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F> void for_each_tensor(F&& f) const { visit(*this, f); }
};

struct BiLstmModel {
  Hyperparams hyper;
  corpus::Vocabulary vocab;
  BiLstmParams params;

  std::size_t vocab_size() const { return vocab.size(); }

  // Checks every tensor against the vocabulary and hyperparameters.
  void validate() const {
    const std::size_t v = vocab.size();
    auto expect = [](const nk::Matrix& m, std::size_t r, std::size_t c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        throw DimensionError(std::string(name) + " has shape " + nk::shape_str(m.rows(), m.cols()) +
                             ", expected " + nk::shape_str(r, c));
      }
    };
    expect(params.embed_left, v, hyper.embed_dim, "embed_left");
    expect(params.embed_right, v, hyper.embed_dim, "embed_right");
    expect(params.out.W, v, hyper.context_dim(), "out.W");
    expect(params.out.b, v, 1, "out.b");
    for (const auto* l : {&params.lstm_left, &params.lstm_right}) {
      expect(l->W_i, hyper.hidden, hyper.embed_dim, "lstm W_i");
      l->validate();
    }
  }
};

// Embeddings and LSTM weights uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero, output layer zero (so an untrained model is uniform).
inline BiLstmModel init_bilstm(corpus::Vocabulary vocab, const Hyperparams& hyper) {
  hyper.validate();
  BiLstmModel m{hyper, std::move(vocab), {}};
  m.params = BiLstmParams(m.vocab.size(), hyper);
  std::mt19937_64 rng(hyper.seed);
  m.params.for_each_tensor([&](const std::string& name, nk::Matrix& t) {
    const bool bias = name.find(".b") != std::string::npos;
    const bool output = name.rfind("out.", 0) == 0;
    if (!bias && !output) nk::glorot_uniform(t, rng);
  });
  return m;
}

namespace detail {

inline void check_target(const corpus::EncodedSentence& sent, std::size_t pos) {
  if (pos == 0 || pos > sent.real_len) {
    throw RejectedError("target position " + std::to_string(pos) +
                        " is not a real word (real_len " + std::to_string(sent.real_len) + ")");
  }
  if (sent.ids.size() < sent.real_len + 2) throw DimensionError("sentence ids shorter than real_len + 2");
}

// h after consuming positions 0..t for each t in [0, upto].
inline std::vector<nk::Vector> run_forward(const nk::LstmParams& lstm, const nk::Matrix& embed,
                                           std::span<const corpus::WordId> ids, std::size_t upto) {
  std::vector<nk::Vector> hs;
  nk::LstmState s = nk::LstmState::zeros(lstm.hidden_size());
  for (std::size_t t = 0; t <= upto; ++t) {
    s = nk::lstm_step(lstm, embed.row(static_cast<std::size_t>(ids[t])), s);
    hs.push_back(s.h);
  }
  return hs;
}

}  // namespace detail

// All left/right hidden states of one sentence, for scoring many targets.
struct BiLstmStates {
  std::vector<nk::Vector> left;   // left[t]: after reading 0..t
  std::vector<nk::Vector> right;  // right[t]: after reading stop..t

  nk::Vector context(std::size_t pos) const {
    nk::Vector v = left[pos - 1];
    v.insert(v.end(), right[pos + 1].begin(), right[pos + 1].end());
    return v;
  }
};

inline BiLstmStates run_bilstm(const BiLstmModel& model, const corpus::EncodedSentence& sent) {
  const std::size_t stop = sent.stop_position();
  BiLstmStates st;
  st.left = detail::run_forward(model.params.lstm_left, model.params.embed_left, sent.ids, stop);
  st.right.assign(stop + 1, {});
  nk::LstmState s = nk::LstmState::zeros(model.params.lstm_right.hidden_size());
  for (std::size_t t = stop + 1; t-- > 0;) {
    s = nk::lstm_step(model.params.lstm_right,
                      model.params.embed_right.row(static_cast<std::size_t>(sent.ids[t])), s);
    st.right[t] = s.h;
  }
  return st;
}

// Sentential context embedding for the word at `pos` (1..real_len).
inline nk::Vector context_embed(const BiLstmModel& model, const corpus::EncodedSentence& sent,
                                std::size_t pos) {
  detail::check_target(sent, pos);
  const std::size_t stop = sent.stop_position();
  nk::Vector left =
      detail::run_forward(model.params.lstm_left, model.params.embed_left, sent.ids, pos - 1).back();
  nk::LstmState s = nk::LstmState::zeros(model.params.lstm_right.hidden_size());
  for (std::size_t t = stop; t > pos; --t) {
    s = nk::lstm_step(model.params.lstm_right,
                      model.params.embed_right.row(static_cast<std::size_t>(sent.ids[t])), s);
  }
  left.insert(left.end(), s.h.begin(), s.h.end());
  return left;
}

inline nk::Vector predict_distribution(const BiLstmModel& model, const corpus::EncodedSentence& sent,
                                       std::size_t pos) {
  return nk::softmax(nk::linear(model.params.out, context_embed(model, sent, pos)));
}

// Sum of cross-entropies over every real word.
inline double sentence_loss(const BiLstmModel& model, const corpus::EncodedSentence& sent) {
  if (sent.real_len == 0) return 0.0;
  BiLstmStates st = run_bilstm(model, sent);
  double loss = 0.0;
  for (std::size_t pos = 1; pos <= sent.real_len; ++pos) {
    nk::Vector z = nk::linear(model.params.out, st.context(pos));
    loss += nk::softmax_cross_entropy(z, static_cast<std::size_t>(sent.ids[pos]));
  }
  return loss;
}

// Records the loss terms of one (possibly padded) row on `tape`. Targets
// are the mask-true positions; the right pass starts at the row's own
// <stop>, so fill beyond it is never read.
inline std::vector<nk::Tape::Var> record_bilstm_row(nk::Tape& tape, const BiLstmParams& p,
                                                    BiLstmParams& g,
                                                    const corpus::EncodedSentence& row,
                                                    const std::vector<bool>& mask) {
  std::vector<nk::Tape::Var> losses;
  if (row.real_len == 0) return losses;
  const std::size_t stop = row.stop_position();
  const std::size_t hs = p.lstm_left.hidden_size();

  std::vector<nk::Tape::Var> left(stop + 1), right(stop + 1);
  nk::Tape::Var h = tape.constant(nk::Vector(hs, 0.0));
  nk::Tape::Var c = tape.constant(nk::Vector(hs, 0.0));
  // The left state after <stop> and the right state after <start> are never
  // used as context, so both passes stop one short.
  for (std::size_t t = 0; t < stop; ++t) {
    auto x = tape.lookup(p.embed_left, g.embed_left, static_cast<std::size_t>(row.ids[t]));
    std::tie(h, c) = tape.lstm(p.lstm_left, g.lstm_left, x, h, c);
    left[t] = h;
  }
  h = tape.constant(nk::Vector(hs, 0.0));
  c = tape.constant(nk::Vector(hs, 0.0));
  for (std::size_t t = stop; t >= 1; --t) {
    auto x = tape.lookup(p.embed_right, g.embed_right, static_cast<std::size_t>(row.ids[t]));
    std::tie(h, c) = tape.lstm(p.lstm_right, g.lstm_right, x, h, c);
    right[t] = h;
  }
  for (std::size_t pos = 1; pos < stop; ++pos) {
    if (pos >= mask.size() || !mask[pos]) continue;
    auto ctx = tape.concat(left[pos - 1], right[pos + 1]);
    auto z = tape.linear(p.out, g.out, ctx);
    losses.push_back(tape.softmax_xent(z, static_cast<std::size_t>(row.ids[pos])));
  }
  return losses;
}

inline TrainLog train_bilstm(BiLstmModel& model, std::span<const corpus::EncodedSentence> sentences,
                             const TrainOptions& options = {}) {
  model.validate();
  RowLossRecorder<BiLstmParams> rec = record_bilstm_row;
  return train_masked(model.params, sentences, model.hyper, rec, options);
}

// Top-k vocabulary words for the slot at `pos`; reserved tokens excluded.
inline SuggestionList suggest(const BiLstmModel& model, const corpus::EncodedSentence& sent,
                              std::size_t pos, std::size_t k) {
  if (k < 1) throw RejectedError("k must be at least 1");
  return top_k(predict_distribution(model, sent, pos), model.vocab, k);
}

}  // namespace wordchoice
