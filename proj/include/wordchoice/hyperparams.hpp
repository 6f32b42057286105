#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include <json.hpp>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"

namespace wordchoice {

// Model and training knobs. Defaults are the full-scale settings: 200-dim
// embeddings and hidden units, a 30000-word vocabulary, 40-word sentences
// and batches of 100 sentences.
struct Hyperparams {
  std::size_t embed_dim = 200;
  std::size_t hidden = 200;
  std::size_t vocab_cap = corpus::kDefaultMaxVocab;
  std::size_t max_len = corpus::kDefaultMaxSentenceLen;
  std::size_t batch_size = 100;
  double lr = 0.1;
  std::optional<double> clip = 5.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  bool coupled_gates = false;

  // Width of the concatenated left/right context vector.
  std::size_t context_dim() const { return 2 * hidden; }

  void validate() const {
    if (embed_dim == 0 || hidden == 0) throw DimensionError("embed_dim and hidden must be positive");
    if (batch_size == 0) throw DimensionError("batch_size must be at least 1");
    if (vocab_cap == 0) throw DimensionError("vocab cap must be at least 1");
    if (!(lr > 0.0)) throw DimensionError("learning rate must be positive");
    if (clip && !(*clip > 0.0)) throw DimensionError("clip must be positive when set");
  }
};

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = nlohmann::json{{"embed_dim", h.embed_dim},
                     {"hidden", h.hidden},
                     {"context_dim", h.context_dim()},
                     {"vocab_cap", h.vocab_cap},
                     {"max_len", h.max_len},
                     {"batch_size", h.batch_size},
                     {"lr", h.lr},
                     {"clip", h.clip ? nlohmann::json(*h.clip) : nlohmann::json(nullptr)},
                     {"epochs", h.epochs},
                     {"seed", h.seed},
                     {"coupled_gates", h.coupled_gates}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& h) {
  h.embed_dim = j.at("embed_dim").get<std::size_t>();
  h.hidden = j.at("hidden").get<std::size_t>();
  h.vocab_cap = j.at("vocab_cap").get<std::size_t>();
  h.max_len = j.at("max_len").get<std::size_t>();
  h.batch_size = j.at("batch_size").get<std::size_t>();
  h.lr = j.at("lr").get<double>();
  h.clip = j.at("clip").is_null() ? std::nullopt : std::optional<double>(j.at("clip").get<double>());
  h.epochs = j.at("epochs").get<std::size_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.coupled_gates = j.at("coupled_gates").get<bool>();
  if (j.contains("context_dim") && j.at("context_dim").get<std::size_t>() != h.context_dim()) {
    throw DimensionError("context_dim must equal 2 * hidden");
  }
}

}  // namespace wordchoice
