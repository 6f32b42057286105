#pragma once

// Part-of-speech filtering of suggestion lists against a sense lexicon.
// A candidate survives when it shares at least one POS tag with the word
// the writer originally used.

#include <bitset>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/suggestion.hpp"

namespace wordchoice::pos {

enum class Tag : std::size_t { kNoun, kVerb, kAdj, kAdv, kPrep, kPron, kDet, kConj, kModal, kOther };

inline constexpr std::size_t kTagCount = 10;
inline constexpr std::string_view kTagNames[kTagCount] = {"noun", "verb", "adj",   "adv",   "prep",
                                                          "pron", "det",  "conj",  "modal", "other"};

inline std::optional<Tag> parse_tag(std::string_view name) {
  for (std::size_t t = 0; t < kTagCount; ++t) {
    if (kTagNames[t] == name) return static_cast<Tag>(t);
  }
  return std::nullopt;
}

class TagSet {
 public:
  TagSet() = default;
  TagSet(std::initializer_list<Tag> tags) {
    for (Tag t : tags) add(t);
  }

  void add(Tag t) { bits_.set(static_cast<std::size_t>(t)); }
  bool contains(Tag t) const { return bits_.test(static_cast<std::size_t>(t)); }
  bool empty() const { return bits_.none(); }
  bool intersects(const TagSet& o) const { return (bits_ & o.bits_).any(); }
  TagSet& operator|=(const TagSet& o) {
    bits_ |= o.bits_;
    return *this;
  }
  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::bitset<kTagCount> bits_;
};

class Lexicon {
 public:
  // Lookups are lowercase; unknown words yield nullptr.
  const TagSet* find(std::string_view word) const {
    auto it = tags_.find(corpus::to_lower(word));
    return it == tags_.end() ? nullptr : &it->second;
  }

  void add(const std::string& word, const TagSet& tags) { tags_[corpus::to_lower(word)] |= tags; }

  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, TagSet> tags_;
};

// TSV: `word<TAB>tag,tag,...`. Blank lines are ignored; duplicate words
// merge their tags.
inline Lexicon read_lexicon(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError("lexicon line " + std::to_string(line_no) + ": expected word<TAB>tags");
    }
    TagSet tags;
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      std::size_t comma = rest.find(',', start);
      if (comma == std::string_view::npos) comma = rest.size();
      std::string_view name = rest.substr(start, comma - start);
      auto tag = parse_tag(name);
      if (!tag) {
        throw FormatError("lexicon line " + std::to_string(line_no) + ": unknown tag '" +
                          std::string(name) + "'");
      }
      tags.add(*tag);
      start = comma + 1;
    }
    lex.add(line.substr(0, tab), tags);
  }
  return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon: " + path);
  return read_lexicon(in);
}

struct FilterResult {
  SuggestionList kept;
  // True when the original word had no lexicon entry and the list was
  // passed through unchanged.
  bool bypassed = false;
};

// Keeps candidates sharing a POS with `original`, preserving order and
// scores. Candidates without an entry are dropped.
inline FilterResult filter_candidates(const Lexicon& lex, std::string_view original,
                                      const SuggestionList& candidates) {
  const TagSet* want = lex.find(original);
  if (want == nullptr) return {candidates, true};
  FilterResult out;
  for (const Suggestion& s : candidates) {
    const TagSet* have = lex.find(s.word);
    if (have != nullptr && have->intersects(*want)) out.kept.push_back(s);
  }
  return out;
}

// Hook for a statistical tagger that tags a candidate in place of the
// original word. No implementation ships with the library.
class ContextTagger {
 public:
  virtual ~ContextTagger() = default;
  virtual TagSet tag(const corpus::Tokens& tokens, std::size_t index) const = 0;
};

inline FilterResult filter_with_tagger(const ContextTagger& tagger, const corpus::Tokens& tokens,
                                       std::size_t index, const SuggestionList& candidates) {
  const TagSet want = tagger.tag(tokens, index);
  if (want.empty()) return {candidates, true};
  FilterResult out;
  corpus::Tokens probe = tokens;
  for (const Suggestion& s : candidates) {
    probe[index] = s.word;
    if (tagger.tag(probe, index).intersects(want)) out.kept.push_back(s);
  }
  return out;
}

}  // namespace wordchoice::pos
