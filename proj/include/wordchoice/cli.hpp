#pragma once

// Command-line driver: prep, train, train-ngram, train-rnnlm, suggest,
// eval and serve. Exit status is 0 on success, 1 on usage errors and 2 on
// data or model errors.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "wordchoice/baselines/ngram.hpp"
#include "wordchoice/baselines/rnnlm.hpp"
#include "wordchoice/bilstm.hpp"
#include "wordchoice/checkpoint.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/eval.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/pipeline.hpp"
#include "wordchoice/posfilter.hpp"
#include "wordchoice/service.hpp"

namespace wordchoice::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct Config {
  Hyperparams hyper;
  double clip = 5.0;  // 0 disables clipping
  std::size_t threads = 1;
  std::size_t k = 100;
  std::size_t order = 5;
  std::string direction = "left-to-right";
  std::string corpus_path;
  std::string vocab_path;
  std::string out_path;
  std::string out_corpus_path;
  std::string model_path;
  std::string ngram_path;
  std::string lexicon_path;
  std::string testset_path;
  std::string annotations_a;
  std::string annotations_b;
  std::string report_path;
  std::string static_dir;
  std::string addr = "127.0.0.1:8080";
  std::string model_name = "default";
  std::string sentence;
  bool no_filter = false;
  bool table = false;

  nlohmann::json to_json() const {
    Hyperparams h = hyper;
    h.clip = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
    return {{"hyperparams", h},
            {"threads", threads},
            {"k", k},
            {"order", order},
            {"direction", direction},
            {"corpus", corpus_path},
            {"vocab", vocab_path},
            {"out", out_path},
            {"model", model_path},
            {"ngram", ngram_path},
            {"lexicon", lexicon_path},
            {"testset", testset_path},
            {"addr", addr}};
  }
};

namespace detail {

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("wordchoice", sink);
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("WORDCHOICE_LOG");
  logger->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  return logger;
}

inline std::vector<corpus::Tokens> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);
  auto sentences = corpus::tokenize_lines(in);
  std::erase_if(sentences, [](const corpus::Tokens& s) { return s.empty(); });
  return sentences;
}

inline void add_hyper_flags(CLI::App* cmd, Config& cfg) {
  cmd->add_option("--embed-dim", cfg.hyper.embed_dim, "word embedding dimension")->capture_default_str();
  cmd->add_option("--hidden", cfg.hyper.hidden, "LSTM hidden units")->capture_default_str();
  cmd->add_option("--batch-size", cfg.hyper.batch_size, "sentences per batch")->capture_default_str();
  cmd->add_option("--max-len", cfg.hyper.max_len, "maximum sentence length")->capture_default_str();
  cmd->add_option("--vocab", cfg.hyper.vocab_cap, "vocabulary cap")->capture_default_str();
  cmd->add_option("--lr", cfg.hyper.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--clip", cfg.clip, "global gradient-norm clip (0 disables)")->capture_default_str();
  cmd->add_option("--epochs", cfg.hyper.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--seed", cfg.hyper.seed, "random seed")->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "worker threads")->capture_default_str();
  cmd->add_flag("--coupled-gates", cfg.hyper.coupled_gates, "use f = 1 - i in the LSTM cell");
}

// Vocabulary from --vocab-file if given, else built from the corpus.
inline corpus::Vocabulary corpus_vocab(const Config& cfg, const std::vector<corpus::Tokens>& sentences) {
  if (!cfg.vocab_path.empty()) return corpus::load_vocab(cfg.vocab_path);
  return corpus::build_vocab(sentences, cfg.hyper.vocab_cap);
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

inline std::vector<eval::GoldSet> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations: " + path);
  std::vector<eval::GoldSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      eval::GoldSet set;
      for (const auto& w : nlohmann::json::parse(line)) set.insert(corpus::to_lower(w.get<std::string>()));
      out.push_back(std::move(set));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("annotations line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Config cfg;
  CLI::App app{"Context-conditioned word choice suggestions"};
  app.require_subcommand(1);

  auto* prep = app.add_subcommand("prep", "tokenize a corpus, filter long sentences, write a vocabulary");
  prep->add_option("--corpus", cfg.corpus_path, "raw corpus, one sentence per line")->required();
  prep->add_option("--out-corpus", cfg.out_corpus_path, "tokenized corpus output")->required();
  prep->add_option("--out-vocab", cfg.vocab_path, "vocabulary output")->required();
  prep->add_option("--vocab", cfg.hyper.vocab_cap, "vocabulary cap")->capture_default_str();
  prep->add_option("--max-len", cfg.hyper.max_len, "maximum sentence length")->capture_default_str();

  auto* train = app.add_subcommand("train", "train the bidirectional LSTM model");
  train->add_option("--corpus", cfg.corpus_path, "training corpus")->required();
  train->add_option("--vocab-file", cfg.vocab_path, "vocabulary file (built from corpus if absent)");
  train->add_option("--out", cfg.out_path, "checkpoint output")->required();
  detail::add_hyper_flags(train, cfg);

  auto* train_rnnlm = app.add_subcommand("train-rnnlm", "train a unidirectional LSTM language model");
  train_rnnlm->add_option("--corpus", cfg.corpus_path, "training corpus")->required();
  train_rnnlm->add_option("--vocab-file", cfg.vocab_path, "vocabulary file (built from corpus if absent)");
  train_rnnlm->add_option("--out", cfg.out_path, "checkpoint output")->required();
  train_rnnlm->add_option("--direction", cfg.direction, "left-to-right or right-to-left")
      ->check(CLI::IsMember({"left-to-right", "right-to-left", "l2r", "r2l"}))
      ->capture_default_str();
  detail::add_hyper_flags(train_rnnlm, cfg);

  auto* train_ngram = app.add_subcommand("train-ngram", "train a Kneser-Ney n-gram model");
  train_ngram->add_option("--corpus", cfg.corpus_path, "training corpus")->required();
  train_ngram->add_option("--vocab-file", cfg.vocab_path, "vocabulary file (built from corpus if absent)");
  train_ngram->add_option("--vocab", cfg.hyper.vocab_cap, "vocabulary cap")->capture_default_str();
  train_ngram->add_option("--order", cfg.order, "n-gram order")->capture_default_str();
  train_ngram->add_option("--out", cfg.out_path, "table output")->required();

  auto* suggest_cmd = app.add_subcommand("suggest", "rank replacements for the *marked* word");
  suggest_cmd->add_option("--model", cfg.model_path, "checkpoint")->required();
  suggest_cmd->add_option("--lexicon", cfg.lexicon_path, "POS lexicon (TSV)");
  suggest_cmd->add_option("--k", cfg.k, "suggestions to print")->capture_default_str();
  suggest_cmd->add_flag("--no-filter", cfg.no_filter, "skip POS filtering");
  suggest_cmd->add_option("sentence", cfg.sentence, "sentence with the target marked as *word*")->required();

  auto* eval_cmd = app.add_subcommand("eval", "strict MRR over a JSONL test set");
  auto* model_opt = eval_cmd->add_option("--model", cfg.model_path, "bilstm or rnnlm checkpoint");
  auto* ngram_opt = eval_cmd->add_option("--ngram", cfg.ngram_path, "n-gram table");
  model_opt->excludes(ngram_opt);
  eval_cmd->add_option("--testset", cfg.testset_path, "JSONL test set")->required();
  eval_cmd->add_option("--lexicon", cfg.lexicon_path, "POS lexicon (TSV)");
  eval_cmd->add_option("--k", cfg.k, "rank cutoff")->capture_default_str();
  eval_cmd->add_option("--max-len", cfg.hyper.max_len, "skip longer sentences")->capture_default_str();
  eval_cmd->add_option("--annotations-a", cfg.annotations_a, "first annotator's accepted words (JSONL arrays)");
  eval_cmd->add_option("--annotations-b", cfg.annotations_b, "second annotator's accepted words (JSONL arrays)");
  eval_cmd->add_option("--report", cfg.report_path, "also write the JSON report here");
  eval_cmd->add_flag("--table", cfg.table, "print the per-error-type table instead of JSON");

  auto* serve = app.add_subcommand("serve", "HTTP suggestion service");
  serve->add_option("--addr", cfg.addr, "host:port")->capture_default_str();
  serve->add_option("--model", cfg.model_path, "checkpoint")->required();
  serve->add_option("--lexicon", cfg.lexicon_path, "POS lexicon (TSV)");
  serve->add_option("--name", cfg.model_name, "model name reported to clients")->capture_default_str();
  serve->add_option("--static-dir", cfg.static_dir, "directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  auto log = detail::make_logger(err);
  cfg.hyper.clip = cfg.clip > 0.0 ? std::optional<double>(cfg.clip) : std::nullopt;

  try {
    try {
      cfg.hyper.validate();
    } catch (const DimensionError& e) {
      throw Error(ErrorKind::kUsage, e.what());
    }
    log->info("config {}", cfg.to_json().dump());

    if (prep->parsed()) {
      auto sentences = detail::read_corpus(cfg.corpus_path);
      std::ofstream tok(cfg.out_corpus_path);
      if (!tok) throw IoError("cannot write " + cfg.out_corpus_path);
      std::vector<corpus::Tokens> kept;
      std::size_t tokens_in = 0, tokens_out = 0;
      for (auto& s : sentences) {
        tokens_in += s.size();
        if (s.size() > cfg.hyper.max_len) continue;
        tokens_out += s.size();
        for (std::size_t i = 0; i < s.size(); ++i) tok << (i ? " " : "") << s[i];
        tok << '\n';
        kept.push_back(std::move(s));
      }
      auto vocab = corpus::build_vocab(kept, cfg.hyper.vocab_cap);
      std::ofstream vout(cfg.vocab_path);
      if (!vout) throw IoError("cannot write " + cfg.vocab_path);
      corpus::write_vocab(vocab, vout);
      out << nlohmann::json{{"sentences_in", sentences.size()},
                            {"sentences_kept", kept.size()},
                            {"tokens_in", tokens_in},
                            {"tokens_kept", tokens_out},
                            {"vocab_size", vocab.size()}}
                 .dump()
          << '\n';
      return kExitOk;
    }

    TrainOptions topts;
    topts.threads = cfg.threads;
    topts.on_epoch = [&](const EpochReport& r) {
      log->info("epoch {} mean loss {:.6f} over {} targets", r.epoch + 1, r.mean_loss, r.targets);
    };

    if (train->parsed() || train_rnnlm->parsed()) {
      auto sentences = detail::read_corpus(cfg.corpus_path);
      auto vocab = detail::corpus_vocab(cfg, sentences);
      corpus::EncodeStats stats;
      auto encoded = corpus::encode_corpus(sentences, vocab, cfg.hyper.max_len, &stats);
      log->info("{} sentences kept, {} skipped as too long, vocabulary {}", stats.kept,
                stats.rejected_too_long, vocab.size());
      TrainLog tlog;
      if (train->parsed()) {
        BiLstmModel model = init_bilstm(std::move(vocab), cfg.hyper);
        tlog = train_bilstm(model, encoded, topts);
        checkpoint::save_checkpoint(model, cfg.out_path);
      } else {
        auto dir = baselines::parse_direction(cfg.direction);
        baselines::RnnLm model = baselines::rnnlm_train(encoded, std::move(vocab), cfg.hyper, dir, &tlog, topts);
        checkpoint::save_checkpoint(model, cfg.out_path);
      }
      nlohmann::json losses = nlohmann::json::array();
      for (const auto& e : tlog.epochs) losses.push_back(e.mean_loss);
      out << nlohmann::json{{"checkpoint", cfg.out_path},
                            {"sentences", stats.kept},
                            {"skipped_too_long", stats.rejected_too_long},
                            {"epoch_mean_loss", losses}}
                 .dump()
          << '\n';
      return kExitOk;
    }

    if (train_ngram->parsed()) {
      auto sentences = detail::read_corpus(cfg.corpus_path);
      auto vocab = cfg.vocab_path.empty()
                       ? corpus::build_vocab(sentences, cfg.hyper.vocab_cap)
                       : corpus::load_vocab(cfg.vocab_path);
      auto encoded = corpus::encode_corpus(sentences, vocab, std::numeric_limits<std::size_t>::max());
      auto table = baselines::ngram_train(encoded, vocab, cfg.order);
      baselines::save_ngram_table(table, cfg.out_path);
      out << nlohmann::json{{"table", cfg.out_path}, {"order", cfg.order}, {"sentences", encoded.size()}}.dump()
          << '\n';
      return kExitOk;
    }

    std::shared_ptr<const pos::Lexicon> lexicon;
    if (!cfg.lexicon_path.empty()) lexicon = std::make_shared<const pos::Lexicon>(pos::load_lexicon(cfg.lexicon_path));

    if (suggest_cmd->parsed()) {
      if (cfg.k < 1) throw Error(ErrorKind::kUsage, "--k must be at least 1");
      auto marked = corpus::parse_marked(cfg.sentence);
      const pos::Lexicon* lex = cfg.no_filter ? nullptr : lexicon.get();
      SuggestionList list;
      bool bypassed = false;
      if (checkpoint::peek_kind(cfg.model_path) == checkpoint::kKindRnnLm) {
        auto model = checkpoint::load_rnnlm_checkpoint(cfg.model_path);
        auto sent = corpus::encode(marked.tokens, model.vocab, model.hyper.max_len);
        list = baselines::rnnlm_rank(model, sent, corpus::EncodedSentence::position_of(marked.target_index), 100);
        if (lex != nullptr) {
          auto f = pos::filter_candidates(*lex, marked.tokens[marked.target_index], list);
          list = std::move(f.kept);
          bypassed = f.bypassed;
        }
        list = truncate(std::move(list), cfg.k);
      } else {
        auto model = checkpoint::load_checkpoint(cfg.model_path);
        auto result = suggest_pipeline(model, lex, marked.tokens, marked.target_index, cfg.k,
                                       std::max<std::size_t>(cfg.k, 100));
        list = std::move(result.suggestions);
        bypassed = result.pos_bypassed;
      }
      if (bypassed) log->warn("'{}' has no lexicon entry; POS filter bypassed", marked.tokens[marked.target_index]);
      out << std::setprecision(6);
      for (std::size_t r = 0; r < list.size(); ++r) {
        out << (r + 1) << ' ' << list[r].word << ' ' << list[r].score << '\n';
      }
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      if (cfg.model_path.empty() == cfg.ngram_path.empty()) {
        throw Error(ErrorKind::kUsage, "eval needs exactly one of --model or --ngram");
      }
      auto cases = eval::load_testset(cfg.testset_path);
      eval::EvalOptions opts;
      opts.k = cfg.k;
      opts.max_len = cfg.hyper.max_len;
      opts.lexicon = lexicon.get();

      std::optional<BiLstmModel> bilstm;
      std::optional<baselines::RnnLm> rnnlm;
      std::optional<baselines::NGramTable> ngram;
      eval::Ranker ranker;
      if (!cfg.ngram_path.empty()) {
        ngram = baselines::load_ngram_table(cfg.ngram_path);
        ranker = ngram_ranker(*ngram);
        opts.vocab = &ngram->vocab();
        opts.max_len = std::numeric_limits<std::size_t>::max();
      } else if (checkpoint::peek_kind(cfg.model_path) == checkpoint::kKindRnnLm) {
        rnnlm = checkpoint::load_rnnlm_checkpoint(cfg.model_path);
        ranker = rnnlm_ranker(*rnnlm);
        opts.vocab = &rnnlm->vocab;
        opts.max_len = std::min(opts.max_len, rnnlm->hyper.max_len);
      } else {
        bilstm = checkpoint::load_checkpoint(cfg.model_path);
        ranker = bilstm_ranker(*bilstm);
        opts.vocab = &bilstm->vocab;
        opts.max_len = std::min(opts.max_len, bilstm->hyper.max_len);
      }

      eval::EvalReport report = eval::evaluate(ranker, cases, opts);
      nlohmann::json j = report.to_json();
      if (!cfg.annotations_a.empty() || !cfg.annotations_b.empty()) {
        if (cfg.annotations_a.empty() || cfg.annotations_b.empty()) {
          throw Error(ErrorKind::kUsage, "--annotations-a and --annotations-b go together");
        }
        auto a = detail::read_annotations(cfg.annotations_a);
        auto b = detail::read_annotations(cfg.annotations_b);
        auto sets = eval::build_multigold_sets(cases, a, b);
        j["combined"] = eval::evaluate(ranker, sets.combined, opts).to_json();
        j["intersection"] = eval::evaluate(ranker, sets.intersection, opts).to_json();
      }
      if (!cfg.report_path.empty()) detail::write_file(cfg.report_path, j.dump(2) + "\n");
      if (cfg.table) {
        out << report.to_table();
      } else {
        out << j.dump(2) << '\n';
      }
      return kExitOk;
    }

    if (serve->parsed()) {
      const auto colon = cfg.addr.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorKind::kUsage, "--addr must be host:port");
      const std::string host = cfg.addr.substr(0, colon);
      const int port = std::stoi(cfg.addr.substr(colon + 1));
      service::SuggestionService svc(cfg.model_name);
      httplib::Server server;
      svc.mount(server, cfg.static_dir.empty() ? std::nullopt : std::optional<std::string>(cfg.static_dir));
      // Health reports 503 until the checkpoint finishes loading.
      std::thread loader([&] {
        try {
          auto model = std::make_shared<const BiLstmModel>(checkpoint::load_checkpoint(cfg.model_path));
          svc.install(model, lexicon);
          log->info("model '{}' loaded, vocabulary {}", cfg.model_name, model->vocab.size());
        } catch (const std::exception& e) {
          log->error("model load failed: {}", e.what());
          server.stop();
        }
      });
      log->info("listening on {}", cfg.addr);
      const bool ok = server.listen(host, port);
      loader.join();
      if (!ok && !svc.ready()) return kExitData;
      return ok ? kExitOk : kExitData;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace wordchoice::cli
