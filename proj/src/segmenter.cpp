#include "edu4fd/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cue_lexicon.inc"

namespace edu4fd {

SegmentMode parse_segment_mode(std::string_view s) {
  if (s == "gold") return SegmentMode::kGold;
  if (s == "rule") return SegmentMode::kRule;
  if (s == "sentence") return SegmentMode::kSentence;
  throw std::invalid_argument("unknown segmentation mode '" + std::string(s) + "' (gold|rule|sentence)");
}

std::string_view segment_mode_name(SegmentMode m) {
  switch (m) {
    case SegmentMode::kGold: return "gold";
    case SegmentMode::kRule: return "rule";
    case SegmentMode::kSentence: return "sentence";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Cue lexicon

CueLexicon CueLexicon::parse(std::string_view content) {
  CueLexicon lex;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    CueEntry e;
    const auto tab = line.find('\t');
    const std::string cue = line.substr(0, tab);
    if (tab != std::string::npos) e.relation_hint = line.substr(tab + 1);
    if (!e.relation_hint.empty() && !parse_relation(e.relation_hint)) {
      throw SegmentError("cue lexicon line " + std::to_string(line_no) + ": unknown relation hint '" +
                         e.relation_hint + "'");
    }
    for (const auto& t : tokenize(cue)) e.tokens.push_back(lowercase(t));
    if (e.tokens.empty() || e.tokens.size() > 2) {
      throw SegmentError("cue lexicon line " + std::to_string(line_no) + ": expected one or two tokens");
    }
    lex.entries_.push_back(std::move(e));
  }
  return lex;
}

const CueLexicon& CueLexicon::builtin() {
  static const CueLexicon lex = parse(kBuiltinCueLexicon);
  return lex;
}

CueLexicon CueLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cue lexicon " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool CueLexicon::opens_clause(const std::vector<Token>& tokens, std::size_t i) const {
  if (i == 0 || i >= tokens.size()) return false;
  const std::string cur = lowercase(tokens[i].text);
  for (const auto& e : entries_) {
    if (e.tokens.size() == 1) {
      if (e.tokens[0] == cur) return true;
    } else if (e.tokens[1] == cur && lowercase(tokens[i - 1].text) == e.tokens[0]) {
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------

bool looks_like_verb(std::string_view token) {
  static constexpr std::string_view kFunctionWords[] = {
      "the",   "a",     "an",    "this",    "that",    "these", "those", "his",   "her",
      "their", "its",   "our",   "my",      "your",    "him",   "them",  "me",    "us",
      "it",    "you",   "all",   "some",    "any",     "each",  "every", "no",    "one",
      "two",   "three", "what",  "which",   "whom",    "who",   "where", "there", "here",
      "many",  "much",  "more",  "most",    "other",   "another", "such", "both",
  };
  if (token.empty()) return false;
  for (char c : token) {
    if (c < 'a' || c > 'z') return false;
  }
  return std::find(std::begin(kFunctionWords), std::end(kFunctionWords), token) == std::end(kFunctionWords);
}

// ---------------------------------------------------------------------------
// Sentences

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::string_view kAbbreviations[] = {
    "mr.",   "mrs.", "ms.",   "dr.",  "prof.", "sr.",  "jr.",  "st.",  "mt.",  "u.s.", "u.k.",
    "u.n.",  "e.g.", "i.e.",  "etc.", "vs.",   "inc.", "ltd.", "co.",  "corp.", "gen.", "gov.",
    "sen.",  "rep.", "lt.",   "col.", "capt.", "sgt.", "no.",  "jan.", "feb.", "mar.", "apr.",
    "aug.",  "sep.", "sept.", "oct.", "nov.",  "dec.", "a.m.", "p.m.",
};

bool is_abbreviation(std::string_view text, std::size_t period) {
  std::size_t b = period;
  while (b > 0 && !is_space(text[b - 1])) --b;
  while (b < period && std::string_view("\"'([{").find(text[b]) != std::string_view::npos) ++b;
  const std::string word = lowercase(text.substr(b, period + 1 - b));
  if (word.size() == 2 && std::isupper(static_cast<unsigned char>(text[b]))) return true;  // initial
  return std::find(std::begin(kAbbreviations), std::end(kAbbreviations), word) != std::end(kAbbreviations);
}

Span trimmed(std::string_view text, std::size_t b, std::size_t e) {
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return {b, e};
}

}  // namespace

std::vector<Span> segment_sentences(std::string_view text) {
  std::vector<Span> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < text.size() && std::string_view("\"')]}").find(text[j]) != std::string_view::npos) ++j;
    if (j >= text.size() || !is_space(text[j])) continue;
    std::size_t k = j;
    while (k < text.size() && is_space(text[k])) ++k;
    if (k >= text.size()) continue;
    const auto next = static_cast<unsigned char>(text[k]);
    if (!std::isupper(next) && !std::isdigit(next) && std::string_view("\"'(").find(text[k]) == std::string_view::npos) {
      continue;
    }
    if (c == '.' && is_abbreviation(text, i)) continue;
    const Span s = trimmed(text, start, j);
    if (s.start < s.end) out.push_back(s);
    start = k;
    i = k - 1;
  }
  const Span tail = trimmed(text, start, text.size());
  if (tail.start < tail.end) out.push_back(tail);
  return out;
}

// ---------------------------------------------------------------------------
// Clauses

namespace {

bool is_coordinator(const std::string& lower) {
  return lower == "and" || lower == "but" || lower == "or" || lower == "so" || lower == "yet";
}

}  // namespace

std::vector<std::size_t> clause_boundaries(const std::vector<Token>& tokens, const CueLexicon& lexicon) {
  std::vector<std::size_t> starts{0};
  if (tokens.empty()) return starts;
  std::size_t seg_start = 0;
  for (std::size_t b = 1; b < tokens.size(); ++b) {
    const std::string cur = lowercase(tokens[b].text);
    const std::string& prev = tokens[b - 1].text;
    bool split = lexicon.opens_clause(tokens, b);
    split = split || (prev == "," && is_coordinator(cur));
    split = split || prev == ";";
    split = split || (cur == "to" && b + 1 < tokens.size() && looks_like_verb(tokens[b + 1].text) &&
                      b - seg_start >= 3);
    if (split) {
      starts.push_back(b);
      seg_start = b;
    }
  }
  // Merge fragments shorter than 2 tokens.
  auto frag_len = [&](std::size_t k) {
    const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : tokens.size();
    return end - starts[k];
  };
  for (std::size_t k = 1; k < starts.size();) {
    if (frag_len(k) < 2) {
      starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }
  if (starts.size() > 1 && frag_len(0) < 2) starts.erase(starts.begin() + 1);
  return starts;
}

// ---------------------------------------------------------------------------

namespace {

Tokens truncated(Tokens t, std::size_t max_len) {
  if (t.size() > max_len) t.resize(max_len);
  return t;
}

}  // namespace

EDUSeq segment_edus(const Document& doc, SegmentMode mode, std::size_t max_edu_len, const CueLexicon& lexicon) {
  if (max_edu_len == 0) throw SegmentError("max_edu_len must be positive");
  EDUSeq seq;
  if (mode == SegmentMode::kGold) {
    if (!doc.gold_edus) throw SegmentError("document '" + doc.id + "': gold mode requires gold EDUs");
    std::size_t sentence = 0;
    for (const auto& e : *doc.gold_edus) {
      if (e.empty()) throw SegmentError("document '" + doc.id + "': empty gold EDU");
      seq.edus.push_back(truncated(e, max_edu_len));
      seq.sentence_of.push_back(sentence);
      // A gold EDU closing with terminal punctuation ends its sentence.
      std::size_t last = e.size();
      while (last > 0 && std::string_view("\"')]}").find(e[last - 1]) != std::string_view::npos &&
             e[last - 1].size() == 1) {
        --last;
      }
      if (last > 0 && (e[last - 1] == "." || e[last - 1] == "!" || e[last - 1] == "?")) ++sentence;
    }
    return seq;
  }

  const std::vector<Span> sentences = segment_sentences(doc.text);
  if (sentences.empty()) throw SegmentError("document '" + doc.id + "': empty text");
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Span sp = sentences[s];
    std::vector<Token> toks =
        tokenize_with_offsets(std::string_view(doc.text).substr(sp.start, sp.end - sp.start));
    for (auto& t : toks) {
      t.begin += sp.start;
      t.end += sp.start;
    }
    std::vector<std::size_t> starts{0};
    if (mode == SegmentMode::kRule) starts = clause_boundaries(toks, lexicon);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const std::size_t b = starts[k];
      const std::size_t e = k + 1 < starts.size() ? starts[k + 1] : toks.size();
      Tokens edu;
      for (std::size_t t = b; t < e; ++t) edu.push_back(toks[t].text);
      seq.spans.push_back({toks[b].begin, toks[e - 1].end});
      seq.edus.push_back(truncated(std::move(edu), max_edu_len));
      seq.sentence_of.push_back(s);
    }
  }
  return seq;
}

bool edu_count_filter(const EDUSeq& seq) { return seq.size() >= kMinEdus; }

}  // namespace edu4fd
