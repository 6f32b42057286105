#pragma once

// Strict mean-reciprocal-rank evaluation over marked-target test sets,
// with per-error-type breakdown and multi-annotator gold sets.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/posfilter.hpp"
#include "wordchoice/suggestion.hpp"

namespace wordchoice::eval {

using GoldSet = std::set<std::string>;

struct TestCase {
  corpus::Tokens tokens;
  std::size_t target_index = 0;
  std::string original;
  GoldSet golds;
  std::optional<std::string> error_type;
};

inline constexpr std::string_view kUnlabeled = "unlabeled";

// One JSON object per line:
//   {"tokens": [...], "target_index": n, "original": "...",
//    "golds": ["..."] | "gold": "...", "error_type": "..."}
// Words are lowercased on load. Blank lines are ignored.
inline std::vector<TestCase> read_testset(std::istream& in) {
  std::vector<TestCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TestCase c;
      for (const auto& t : j.at("tokens")) c.tokens.push_back(corpus::to_lower(t.get<std::string>()));
      c.target_index = j.at("target_index").get<std::size_t>();
      c.original = corpus::to_lower(j.at("original").get<std::string>());
      if (j.contains("golds")) {
        for (const auto& g : j.at("golds")) c.golds.insert(corpus::to_lower(g.get<std::string>()));
      }
      if (j.contains("gold")) c.golds.insert(corpus::to_lower(j.at("gold").get<std::string>()));
      if (j.contains("error_type") && !j.at("error_type").is_null()) {
        c.error_type = j.at("error_type").get<std::string>();
      }
      cases.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("test set line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cases;
}

inline std::vector<TestCase> load_testset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open test set: " + path);
  return read_testset(in);
}

inline nlohmann::json case_to_json(const TestCase& c) {
  nlohmann::json j{{"tokens", c.tokens},
                   {"target_index", c.target_index},
                   {"original", c.original},
                   {"golds", std::vector<std::string>(c.golds.begin(), c.golds.end())}};
  if (c.error_type) j["error_type"] = *c.error_type;
  return j;
}

inline void validate_case(const TestCase& c, std::size_t index) {
  auto bad = [&](const std::string& why) {
    throw InvalidCaseError("test case " + std::to_string(index) + ": " + why);
  };
  if (c.target_index >= c.tokens.size()) bad("target_index out of range");
  if (c.tokens[c.target_index] != c.original) bad("tokens[target_index] differs from original");
  if (c.golds.empty()) bad("no gold corrections");
  if (c.golds.count(c.original) != 0) bad("original word listed as gold");
}

// 1/r for the first gold at 1-based rank r, 0 when no gold is listed.
inline double reciprocal_rank(const SuggestionList& suggestions, const GoldSet& golds) {
  for (std::size_t r = 0; r < suggestions.size(); ++r) {
    if (golds.count(suggestions[r].word) != 0) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

// Full candidate ranking for the slot at `target_index` (lowercased
// tokens). evaluate() applies the POS filter and the top-k cut.
using Ranker = std::function<SuggestionList(const corpus::Tokens& tokens, std::size_t target_index)>;

struct EvalOptions {
  std::size_t k = 100;
  std::size_t max_len = corpus::kDefaultMaxSentenceLen;
  const pos::Lexicon* lexicon = nullptr;
  // When set, golds missing from it are counted as OOV.
  const corpus::Vocabulary* vocab = nullptr;
};

struct CaseResult {
  std::size_t index = 0;
  bool skipped = false;
  std::size_t rank = 0;  // 0 = no gold in the top k
  double reciprocal_rank = 0.0;
  bool pos_bypassed = false;
  bool gold_oov = false;
  std::string error_type;
};

struct TypeSummary {
  std::size_t cases = 0;
  double rr_sum = 0.0;

  double mrr() const { return cases == 0 ? 0.0 : rr_sum / static_cast<double>(cases); }
};

struct EvalReport {
  std::vector<CaseResult> cases;
  std::size_t k = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::size_t pos_bypassed = 0;
  std::size_t gold_oov = 0;
  double rr_sum = 0.0;
  std::map<std::string, TypeSummary> by_type;
  bool pos_filter = false;

  double mrr() const { return evaluated == 0 ? 0.0 : rr_sum / static_cast<double>(evaluated); }

  nlohmann::json to_json() const {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [name, s] : by_type) types[name] = {{"cases", s.cases}, {"mrr", s.mrr()}};
    nlohmann::json per_case = nlohmann::json::array();
    for (const auto& c : cases) {
      per_case.push_back({{"index", c.index},
                          {"skipped", c.skipped},
                          {"rank", c.rank},
                          {"reciprocal_rank", c.reciprocal_rank},
                          {"pos_filter_bypassed", c.pos_bypassed},
                          {"gold_oov", c.gold_oov},
                          {"error_type", c.error_type}});
    }
    return {{"mrr", mrr()},
            {"k", k},
            {"cases_evaluated", evaluated},
            {"cases_skipped", skipped},
            {"pos_filter", pos_filter},
            {"pos_filter_bypassed", pos_bypassed},
            {"gold_oov", gold_oov},
            {"by_error_type", types},
            {"cases", per_case},
            {"notes",
             {"strict policy: a case scores 1/rank of the first gold word in the top k, else 0",
              "skipped (over-length) cases are excluded from the MRR denominator",
              "POS filter is bypassed when the original word has no lexicon entry",
              "multi-gold sets always include the editor's original correction"}}};
  }

  std::string to_table() const {
    std::ostringstream out;
    std::size_t width = 10;
    for (const auto& [name, s] : by_type) width = std::max(width, name.size());
    out << std::left << std::setw(static_cast<int>(width)) << "Error type" << "  " << std::right
        << std::setw(6) << "Cases" << "  " << std::setw(6) << "MRR" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& [name, s] : by_type) {
      out << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right
          << std::setw(6) << s.cases << "  " << std::setw(6) << s.mrr() << '\n';
    }
    out << std::left << std::setw(static_cast<int>(width)) << "Overall" << "  " << std::right
        << std::setw(6) << evaluated << "  " << std::setw(6) << mrr() << '\n';
    out << "skipped " << skipped << ", pos-filter bypassed " << pos_bypassed << ", gold OOV "
        << gold_oov << ", k " << k << '\n';
    return out.str();
  }
};

// Ranks, filters, cuts to k and scores every case. Cases are validated
// first; an invalid case aborts with its index.
inline EvalReport evaluate(const Ranker& ranker, std::span<const TestCase> cases,
                           const EvalOptions& options = {}) {
  for (std::size_t i = 0; i < cases.size(); ++i) validate_case(cases[i], i);
  EvalReport report;
  report.k = options.k;
  report.pos_filter = options.lexicon != nullptr;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const TestCase& c = cases[i];
    CaseResult r;
    r.index = i;
    r.error_type = c.error_type.value_or(std::string(kUnlabeled));
    if (c.tokens.size() > options.max_len) {
      r.skipped = true;
      ++report.skipped;
      report.cases.push_back(r);
      continue;
    }
    SuggestionList ranked = ranker(c.tokens, c.target_index);
    if (options.lexicon != nullptr) {
      auto filtered = pos::filter_candidates(*options.lexicon, c.original, ranked);
      ranked = std::move(filtered.kept);
      r.pos_bypassed = filtered.bypassed;
    }
    ranked = truncate(std::move(ranked), options.k);
    for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
      if (c.golds.count(ranked[rank].word) != 0) {
        r.rank = rank + 1;
        break;
      }
    }
    r.reciprocal_rank = reciprocal_rank(ranked, c.golds);
    if (options.vocab != nullptr) {
      r.gold_oov = std::none_of(c.golds.begin(), c.golds.end(),
                                [&](const std::string& g) { return options.vocab->contains(g); });
    }
    ++report.evaluated;
    report.rr_sum += r.reciprocal_rank;
    report.pos_bypassed += r.pos_bypassed ? 1 : 0;
    report.gold_oov += r.gold_oov ? 1 : 0;
    auto& t = report.by_type[r.error_type];
    ++t.cases;
    t.rr_sum += r.reciprocal_rank;
    report.cases.push_back(std::move(r));
  }
  return report;
}

struct MultiGoldSets {
  std::vector<TestCase> combined;
  std::vector<TestCase> intersection;
};

// combined golds = editor golds + A + B; intersection golds = editor golds
// + (A and B).
inline MultiGoldSets build_multigold_sets(std::span<const TestCase> base,
                                          std::span<const GoldSet> annotator_a,
                                          std::span<const GoldSet> annotator_b) {
  if (annotator_a.size() != base.size() || annotator_b.size() != base.size()) {
    throw InvalidCaseError("annotator lists must align with the base cases (" +
                           std::to_string(base.size()) + " cases, " +
                           std::to_string(annotator_a.size()) + " and " +
                           std::to_string(annotator_b.size()) + " annotations)");
  }
  MultiGoldSets out;
  for (std::size_t i = 0; i < base.size(); ++i) {
    TestCase comb = base[i];
    TestCase inter = base[i];
    comb.golds.insert(annotator_a[i].begin(), annotator_a[i].end());
    comb.golds.insert(annotator_b[i].begin(), annotator_b[i].end());
    for (const auto& w : annotator_a[i]) {
      if (annotator_b[i].count(w) != 0) inter.golds.insert(w);
    }
    // A substitute identical to the written word cannot be a correction.
    comb.golds.erase(comb.original);
    inter.golds.erase(inter.original);
    out.combined.push_back(std::move(comb));
    out.intersection.push_back(std::move(inter));
  }
  return out;
}

}  // namespace wordchoice::eval
