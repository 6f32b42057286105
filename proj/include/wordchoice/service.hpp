#pragma once

// HTTP suggestion service.
//
//   POST /api/suggest  {"tokens": [...], "target_index": n, "k": 10,
//                       "filter_pos": true, "model": "name"}
//   GET  /api/health
//
// Handlers are plain member functions returning (status, JSON body) so
// they can be exercised without a socket; mount() binds them to a
// cpp-httplib server.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "wordchoice/bilstm.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/pipeline.hpp"
#include "wordchoice/posfilter.hpp"

namespace wordchoice::service {

inline constexpr std::size_t kMaxK = 100;
inline constexpr std::size_t kDefaultK = 10;

struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline Reply error_reply(int status, std::string_view reason, const std::string& message) {
  return {status, {{"error", reason}, {"message", message}}};
}

class SuggestionService {
 public:
  explicit SuggestionService(std::string model_name = "default")
      : name_(std::move(model_name)), started_(std::chrono::steady_clock::now()) {}

  // Publishes a model; the lexicon may be null, in which case every
  // response reports the POS filter as bypassed.
  void install(std::shared_ptr<const BiLstmModel> model, std::shared_ptr<const pos::Lexicon> lexicon) {
    auto loaded = std::make_shared<const Loaded>(Loaded{std::move(model), std::move(lexicon)});
    std::lock_guard lock(mu_);
    loaded_ = std::move(loaded);
  }

  bool ready() const { return snapshot() != nullptr; }
  const std::string& model_name() const { return name_; }
  std::size_t requests_served() const { return served_.load(); }

  Reply handle_suggest(std::string_view body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, "invalid_json", e.what());
    }
    return handle_suggest_json(req);
  }

  Reply handle_suggest_json(const nlohmann::json& req) const {
    const auto t0 = std::chrono::steady_clock::now();
    auto loaded = snapshot();
    if (!loaded) return error_reply(503, "model_not_loaded", "model is still loading");
    if (!req.is_object()) return error_reply(400, "invalid_request", "request body must be an object");

    corpus::Tokens tokens;
    std::size_t target = 0;
    std::size_t k = kDefaultK;
    bool filter_pos = true;
    try {
      if (!req.contains("tokens") || !req.at("tokens").is_array()) {
        return error_reply(400, "missing_tokens", "tokens must be an array of strings");
      }
      for (const auto& t : req.at("tokens")) tokens.push_back(corpus::to_lower(t.get<std::string>()));
      if (!req.contains("target_index") || !req.at("target_index").is_number_integer()) {
        return error_reply(400, "missing_target_index", "target_index must be an integer");
      }
      const auto raw_target = req.at("target_index").get<long long>();
      if (raw_target < 0 || static_cast<std::size_t>(raw_target) >= tokens.size()) {
        return error_reply(400, "target_out_of_range",
                           "target_index must be in [0, " + std::to_string(tokens.size()) + ")");
      }
      target = static_cast<std::size_t>(raw_target);
      if (req.contains("k")) {
        if (!req.at("k").is_number_integer()) return error_reply(400, "k_out_of_range", "k must be an integer");
        const auto raw_k = req.at("k").get<long long>();
        if (raw_k < 1 || raw_k > static_cast<long long>(kMaxK)) {
          return error_reply(400, "k_out_of_range", "k must be in [1, 100]");
        }
        k = static_cast<std::size_t>(raw_k);
      }
      if (req.contains("filter_pos")) filter_pos = req.at("filter_pos").get<bool>();
      if (req.contains("model") && !req.at("model").is_null() &&
          req.at("model").get<std::string>() != name_) {
        return error_reply(400, "unknown_model", "this service hosts model '" + name_ + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, "invalid_request", e.what());
    }
    if (tokens.size() > loaded->model->hyper.max_len) {
      return error_reply(400, "sentence_too_long",
                         "sentence has " + std::to_string(tokens.size()) + " tokens; the limit is " +
                             std::to_string(loaded->model->hyper.max_len));
    }

    const pos::Lexicon* lexicon = filter_pos ? loaded->lexicon.get() : nullptr;
    PipelineResult result = suggest_pipeline(*loaded->model, lexicon, tokens, target, k, kMaxK);
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t r = 0; r < result.suggestions.size(); ++r) {
      list.push_back({{"rank", r + 1},
                      {"word", result.suggestions[r].word},
                      {"probability", result.suggestions[r].score}});
    }
    const bool bypassed = filter_pos && (lexicon == nullptr || result.pos_bypassed);
    ++served_;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {200,
            {{"suggestions", std::move(list)},
             {"bypassed_pos_filter", bypassed},
             {"model", name_},
             {"latency_ms", ms}}};
  }

  Reply handle_health() const {
    auto loaded = snapshot();
    const double uptime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    if (!loaded) {
      return {503, {{"status", "loading"}, {"error", "model_not_loaded"}, {"model", name_}, {"uptime_s", uptime}}};
    }
    return {200,
            {{"status", "ok"},
             {"model", name_},
             {"vocab_size", loaded->model->vocab.size()},
             {"hyperparams", loaded->model->hyper},
             {"lexicon_entries", loaded->lexicon ? loaded->lexicon->size() : 0},
             {"requests_served", served_.load()},
             {"uptime_s", uptime}}};
  }

  // Binds the API routes and, when given, serves a static bundle at "/".
  void mount(httplib::Server& server, const std::optional<std::string>& static_dir = std::nullopt) const {
    server.Post("/api/suggest", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, handle_suggest(req.body));
    });
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send(res, handle_health());
    });
    if (static_dir) server.set_mount_point("/", *static_dir);
  }

 private:
  struct Loaded {
    std::shared_ptr<const BiLstmModel> model;
    std::shared_ptr<const pos::Lexicon> lexicon;
  };

  static void send(httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json; charset=utf-8");
  }

  std::shared_ptr<const Loaded> snapshot() const {
    std::lock_guard lock(mu_);
    return loaded_;
  }

  std::string name_;
  std::chrono::steady_clock::time_point started_;
  mutable std::mutex mu_;
  std::shared_ptr<const Loaded> loaded_;
  mutable std::atomic<std::size_t> served_{0};
};

}  // namespace wordchoice::service
