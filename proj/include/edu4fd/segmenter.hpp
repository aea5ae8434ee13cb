#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edu4fd/corpus.hpp"

namespace edu4fd {

class SegmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-open character range [start, end) into a document's text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct EDUSeq {
  std::vector<Tokens> edus;
  /// Character spans of each EDU before truncation; empty in gold mode.
  std::vector<Span> spans;
  /// Sentence index of each EDU, non-decreasing.
  std::vector<std::size_t> sentence_of;

  std::size_t size() const { return edus.size(); }
};

enum class SegmentMode { kGold, kRule, kSentence };

SegmentMode parse_segment_mode(std::string_view s);
std::string_view segment_mode_name(SegmentMode m);

struct CueEntry {
  /// Lowercased tokens. One token: split before it. Two tokens "x y": split
  /// before y when it directly follows x.
  Tokens tokens;
  std::string relation_hint;

  bool operator==(const CueEntry&) const = default;
};

/// Subordinating discourse cues that open a new EDU. Shipped as an editable
/// tab-separated resource (data/cue_lexicon.tsv); the same list is compiled
/// in as the default.
class CueLexicon {
 public:
  static const CueLexicon& builtin();
  static CueLexicon parse(std::string_view content);
  static CueLexicon load(const std::filesystem::path& path);

  /// True if a clause boundary belongs right before tokens[i].
  bool opens_clause(const std::vector<Token>& tokens, std::size_t i) const;

  const std::vector<CueEntry>& entries() const { return entries_; }

 private:
  std::vector<CueEntry> entries_;
};

extern const std::string_view kBuiltinCueLexicon;

/// Crude verb test used by the "to + verb" rules: an all-lowercase
/// alphabetic word that is not a listed function word.
bool looks_like_verb(std::string_view token);

/// Sentence spans, trimmed of surrounding whitespace. Splits after . ! ?
/// (plus closing quotes/brackets) when followed by whitespace and an
/// uppercase letter, digit or opening quote, unless the word ending at the
/// period is a known abbreviation or a single-letter initial.
std::vector<Span> segment_sentences(std::string_view text);

/// Splits one sentence's tokens into clause fragments, returning the token
/// index where each fragment starts (always begins with 0). Fragments
/// shorter than 2 tokens are merged into their left neighbour (the first
/// fragment merges right).
std::vector<std::size_t> clause_boundaries(const std::vector<Token>& tokens,
                                           const CueLexicon& lexicon = CueLexicon::builtin());

inline constexpr std::size_t kDefaultMaxEduLen = 200;

EDUSeq segment_edus(const Document& doc, SegmentMode mode, std::size_t max_edu_len = kDefaultMaxEduLen,
                    const CueLexicon& lexicon = CueLexicon::builtin());

/// Accept iff the sequence has at least two EDUs.
bool edu_count_filter(const EDUSeq& seq);

}  // namespace edu4fd
