#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edu4fd/relation.hpp"

namespace edu4fd {

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for a corpus record that violates the file schema. `line` is
/// 1-based; 0 when the error is not tied to one line.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using Tokens = std::vector<std::string>;

struct Token {
  std::string text;
  std::size_t begin = 0;  // character offsets into the source text
  std::size_t end = 0;
};

/// Whitespace split with leading brackets/quotes and trailing punctuation
/// detached as separate tokens. Case is preserved.
std::vector<Token> tokenize_with_offsets(std::string_view text);
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);
std::string lowercase(std::string_view s);

struct GoldEdge {
  std::size_t head = 0;
  std::size_t dep = 0;
  Relation relation = Relation::kElaboration;

  bool operator==(const GoldEdge&) const = default;
};

enum class Label : int { kReal = 0, kFake = 1 };

struct Document {
  std::string id;
  std::string text;
  int label = 0;
  std::optional<std::vector<Tokens>> gold_edus;
  std::optional<std::vector<GoldEdge>> gold_edges;
  /// Index of an artificial root EDU carried over from an imported parse.
  std::optional<std::size_t> root;

  /// EDU count excluding a flagged root; nullopt without gold EDUs.
  std::optional<std::size_t> edu_count() const;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
};

struct LoadResult {
  Corpus corpus;
  std::size_t dropped_short = 0;  // documents with fewer than 2 EDUs
};

Document parse_document(std::string_view json_line, std::size_t line_no);
std::string document_to_json(const Document& doc);

/// Reads a JSON-lines corpus. Documents whose gold EDU count is below 2 are
/// dropped and counted; documents without gold EDUs are kept and filtered
/// after segmentation.
LoadResult load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

inline constexpr std::size_t kMinEdus = 2;

// ---------------------------------------------------------------------------

class Vocab {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;

  Vocab();

  /// Tokens are lowercased before lookup; unseen tokens map to kUnk.
  std::int64_t lookup(std::string_view token) const;
  std::int64_t add(std::string_view token);
  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(std::int64_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  static Vocab from_tokens(const std::vector<std::string>& id_order);
  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::unordered_map<std::string, std::int64_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Tokens of a document for vocabulary purposes: gold EDU tokens when
/// present, otherwise the tokenized text.
Tokens document_tokens(const Document& doc);

/// Vocabulary over lowercased tokens; tokens seen fewer than min_count
/// times are left out (and therefore map to UNK). Non-reserved ids are
/// assigned in lexicographic order.
Vocab build_vocab(const std::vector<Tokens>& token_docs, std::size_t min_count = 1);
Vocab build_vocab(const Corpus& train, std::size_t min_count = 1);

// ---------------------------------------------------------------------------

struct SplitSpec {
  double test_fraction = 0.10;
  double val_fraction_of_rest = 0.20;
  std::uint64_t seed = 0;
};

struct Splits {
  Corpus train;
  Corpus val;
  Corpus test;
};

/// Round-half-up sizes: test = round(f_test * N), val = round(f_val * rest).
/// Each split keeps the corpus' original relative order.
Splits split_corpus(const Corpus& corpus, const SplitSpec& spec);

// ---------------------------------------------------------------------------

struct CorpusStats {
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t total = 0;
  double avg_edus = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

struct RelationStats {
  // [class][relation]
  std::array<std::array<std::size_t, kNumRelations>, 2> counts{};
  std::array<std::size_t, 2> totals{};

  double frequency(int label, Relation r) const;
};

RelationStats relation_stats(const Corpus& corpus);

using NamedCorpusStats = std::vector<std::pair<std::string, CorpusStats>>;
using NamedRelationStats = std::vector<std::pair<std::string, RelationStats>>;

std::string render_corpus_stats(const NamedCorpusStats& sets);
std::string render_relation_stats(const NamedRelationStats& sets);
std::string corpus_stats_json(const NamedCorpusStats& sets);
std::string relation_stats_json(const NamedRelationStats& sets);

}  // namespace edu4fd
