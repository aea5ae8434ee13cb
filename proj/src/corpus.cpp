#include "edu4fd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "edu4fd/log.hpp"
#include "json.hpp"

namespace edu4fd {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

CorpusError::CorpusError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::string_view kLeading = "\"'([{`";
constexpr std::string_view kTrailing = ".,!?;:\"')]}`";

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    // Peel leading and trailing punctuation off the chunk [i, j).
    std::size_t b = i, e = j;
    std::vector<Token> head, tail;
    while (b < e && kLeading.find(text[b]) != std::string_view::npos && e - b > 1) {
      head.push_back({std::string(1, text[b]), b, b + 1});
      ++b;
    }
    while (e > b && kTrailing.find(text[e - 1]) != std::string_view::npos && e - b > 1) {
      tail.push_back({std::string(1, text[e - 1]), e - 1, e});
      --e;
    }
    for (auto& t : head) out.push_back(std::move(t));
    out.push_back({std::string(text.substr(b, e - b)), b, e});
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.push_back(std::move(*it));
    i = j;
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---------------------------------------------------------------------------
// Documents

std::optional<std::size_t> Document::edu_count() const {
  if (!gold_edus) return std::nullopt;
  std::size_t n = gold_edus->size();
  if (root && *root < n) --n;
  return n;
}

Document parse_document(std::string_view json_line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw CorpusError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw CorpusError(line_no, "record is not a JSON object");

  Document doc;
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw CorpusError(line_no, std::string("missing key '") + key + "'");
    return j.at(key);
  };
  const json& id = require("id");
  if (!id.is_string()) throw CorpusError(line_no, "'id' must be a string");
  doc.id = id.get<std::string>();
  const json& text = require("text");
  if (!text.is_string()) throw CorpusError(line_no, "'text' must be a string");
  doc.text = text.get<std::string>();
  const json& label = require("label");
  if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
    throw CorpusError(line_no, "'label' must be 0 or 1");
  }
  doc.label = label.get<int>();

  if (j.contains("edus") && !j["edus"].is_null()) {
    const json& edus = j["edus"];
    if (!edus.is_array()) throw CorpusError(line_no, "'edus' must be an array of strings");
    std::vector<Tokens> seq;
    for (std::size_t k = 0; k < edus.size(); ++k) {
      if (!edus[k].is_string()) throw CorpusError(line_no, "'edus' must be an array of strings");
      Tokens toks = tokenize(edus[k].get<std::string>());
      if (toks.empty()) throw CorpusError(line_no, "EDU " + std::to_string(k) + " is empty");
      seq.push_back(std::move(toks));
    }
    doc.gold_edus = std::move(seq);
  }

  if (j.contains("root") && !j["root"].is_null()) {
    if (!j["root"].is_number_unsigned()) throw CorpusError(line_no, "'root' must be a non-negative integer");
    doc.root = j["root"].get<std::size_t>();
    if (!doc.gold_edus) throw CorpusError(line_no, "'root' given without 'edus'");
    if (*doc.root >= doc.gold_edus->size()) throw CorpusError(line_no, "'root' index out of range");
  }

  if (j.contains("graph") && !j["graph"].is_null()) {
    const json& graph = j["graph"];
    if (!graph.is_array()) throw CorpusError(line_no, "'graph' must be an array");
    if (!doc.gold_edus) throw CorpusError(line_no, "'graph' given without 'edus'");
    std::vector<GoldEdge> edges;
    for (std::size_t k = 0; k < graph.size(); ++k) {
      const json& e = graph[k];
      const std::string where = "graph edge " + std::to_string(k);
      if (!e.is_object() || !e.contains("head") || !e.contains("dep") || !e.contains("rel")) {
        throw CorpusError(line_no, where + " needs keys head, dep, rel");
      }
      if (!e["head"].is_number_unsigned() || !e["dep"].is_number_unsigned()) {
        throw CorpusError(line_no, where + ": head/dep must be non-negative integers");
      }
      if (!e["rel"].is_string()) throw CorpusError(line_no, where + ": rel must be a string");
      const std::string rel = e["rel"].get<std::string>();
      const auto r = parse_relation(rel);
      if (!r) throw CorpusError(line_no, where + ": unknown relation '" + rel + "'");
      GoldEdge edge{e["head"].get<std::size_t>(), e["dep"].get<std::size_t>(), *r};
      if (edge.head >= doc.gold_edus->size() || edge.dep >= doc.gold_edus->size()) {
        throw CorpusError(line_no, where + ": index out of range for " +
                                       std::to_string(doc.gold_edus->size()) + " EDUs");
      }
      edges.push_back(edge);
    }
    doc.gold_edges = std::move(edges);
  }
  return doc;
}

std::string document_to_json(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["label"] = doc.label;
  if (doc.gold_edus) {
    ordered_json edus = ordered_json::array();
    for (const auto& e : *doc.gold_edus) edus.push_back(join_tokens(e));
    j["edus"] = std::move(edus);
  }
  if (doc.gold_edges) {
    ordered_json graph = ordered_json::array();
    for (const auto& e : *doc.gold_edges) {
      graph.push_back({{"head", e.head}, {"dep", e.dep}, {"rel", std::string(relation_name(e.relation))}});
    }
    j["graph"] = std::move(graph);
  }
  if (doc.root) j["root"] = *doc.root;
  return j.dump();
}

LoadResult load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  LoadResult result;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    Document doc = parse_document(line, line_no);
    if (!ids.insert(doc.id).second) throw CorpusError(line_no, "duplicate document id '" + doc.id + "'");
    if (auto n = doc.edu_count(); n && *n < kMinEdus) {
      ++result.dropped_short;
      continue;
    }
    result.corpus.documents.push_back(std::move(doc));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return result;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& doc : corpus.documents) out << document_to_json(doc) << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

std::int64_t Vocab::lookup(std::string_view token) const {
  auto it = token_to_id_.find(lowercase(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::int64_t Vocab::add(std::string_view token) {
  std::string key = lowercase(token);
  auto it = token_to_id_.find(key);
  if (it != token_to_id_.end()) return it->second;
  const auto id = static_cast<std::int64_t>(id_to_token_.size());
  token_to_id_.emplace(key, id);
  id_to_token_.push_back(std::move(key));
  return id;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& id_order) {
  if (id_order.size() < 2 || id_order[0] != "<pad>" || id_order[1] != "<unk>") {
    throw std::invalid_argument("vocabulary must start with <pad>, <unk>");
  }
  Vocab v;
  for (std::size_t i = 2; i < id_order.size(); ++i) {
    if (v.add(id_order[i]) != static_cast<std::int64_t>(i)) {
      throw std::invalid_argument("vocabulary token list has a duplicate: " + id_order[i]);
    }
  }
  return v;
}

Tokens document_tokens(const Document& doc) {
  if (!doc.gold_edus) return tokenize(doc.text);
  Tokens all;
  for (std::size_t k = 0; k < doc.gold_edus->size(); ++k) {
    if (doc.root && *doc.root == k) continue;
    const auto& e = (*doc.gold_edus)[k];
    all.insert(all.end(), e.begin(), e.end());
  }
  return all;
}

Vocab build_vocab(const std::vector<Tokens>& token_docs, std::size_t min_count) {
  if (token_docs.empty()) throw std::invalid_argument("build_vocab: empty training split");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : token_docs)
    for (const auto& t : doc) ++counts[lowercase(t)];
  Vocab v;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count && tok != "<pad>" && tok != "<unk>") v.add(tok);
  }
  return v;
}

Vocab build_vocab(const Corpus& train, std::size_t min_count) {
  std::vector<Tokens> docs;
  docs.reserve(train.size());
  for (const auto& d : train.documents) docs.push_back(document_tokens(d));
  return build_vocab(docs, min_count);
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

Splits split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
      !(spec.val_fraction_of_rest > 0.0 && spec.val_fraction_of_rest < 1.0)) {
    throw std::invalid_argument("split fractions must lie in (0, 1)");
  }
  const std::size_t n = corpus.size();
  if (n < 10) {
    throw std::invalid_argument("corpus too small to split: " + std::to_string(n) + " documents (need >= 10)");
  }
  const std::size_t n_test = round_half_up(spec.test_fraction * static_cast<double>(n));
  const std::size_t rest = n - n_test;
  const std::size_t n_val = round_half_up(spec.val_fraction_of_rest * static_cast<double>(rest));
  if (n_test == 0 || n_val == 0 || n_val >= rest) {
    throw std::invalid_argument("split fractions produce an empty split for " + std::to_string(n) + " documents");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> which(n, 0);  // 0 train, 1 val, 2 test
  for (std::size_t i = 0; i < n_test; ++i) which[order[i]] = 2;
  for (std::size_t i = n_test; i < n_test + n_val; ++i) which[order[i]] = 1;

  Splits s;
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = which[i] == 0 ? s.train : which[i] == 1 ? s.val : s.test;
    dst.documents.push_back(corpus.documents[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Statistics

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  std::size_t counted = 0, edus = 0;
  for (const auto& d : corpus.documents) {
    (d.label == 1 ? st.n_fake : st.n_real) += 1;
    if (auto n = d.edu_count()) {
      edus += *n;
      ++counted;
    }
  }
  st.total = corpus.size();
  if (counted < st.total) {
    log::warn(std::to_string(st.total - counted) + " document(s) carry no EDUs; excluded from the EDU average");
  }
  st.avg_edus = counted ? static_cast<double>(edus) / static_cast<double>(counted) : 0.0;
  return st;
}

double RelationStats::frequency(int label, Relation r) const {
  const auto c = static_cast<std::size_t>(label);
  return totals[c] ? static_cast<double>(counts[c][index_of(r)]) / static_cast<double>(totals[c]) : 0.0;
}

RelationStats relation_stats(const Corpus& corpus) {
  RelationStats st;
  for (const auto& d : corpus.documents) {
    if (!d.gold_edges) continue;
    const auto c = static_cast<std::size_t>(d.label);
    for (const auto& e : *d.gold_edges) {
      ++st.counts[c][index_of(e.relation)];
      ++st.totals[c];
    }
  }
  for (int c = 0; c < 2; ++c) {
    if (st.totals[static_cast<std::size_t>(c)] == 0) {
      log::warn(std::string(c ? "fake" : "real") + " class has no edges; relation frequencies reported as 0");
    }
  }
  return st;
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) os << "  ";
      os << r[c];
      if (c + 1 < r.size()) os << std::string(width[c] - r[c].size(), ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string render_corpus_stats(const NamedCorpusStats& sets) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Statistic"};
  for (const auto& [name, st] : sets) header.push_back(name);
  rows.push_back(header);
  auto add_row = [&](const std::string& label, auto fn) {
    std::vector<std::string> r{label};
    for (const auto& [name, st] : sets) r.push_back(fn(st));
    rows.push_back(std::move(r));
  };
  add_row("# Real news", [](const CorpusStats& s) { return std::to_string(s.n_real); });
  add_row("# Fake news", [](const CorpusStats& s) { return std::to_string(s.n_fake); });
  add_row("# Total news", [](const CorpusStats& s) { return std::to_string(s.total); });
  add_row("avg.# EDUs per news", [](const CorpusStats& s) { return fmt2(s.avg_edus); });
  return render_table(rows);
}

std::string render_relation_stats(const NamedRelationStats& sets) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> h1{"relation"}, h2{""};
  for (const auto& [name, st] : sets) {
    h1.push_back(name);
    h1.push_back("");
    h2.push_back("Real");
    h2.push_back("Fake");
  }
  rows.push_back(h1);
  rows.push_back(h2);
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    std::vector<std::string> row{std::string(kRelationNames[r])};
    for (const auto& [name, st] : sets) {
      row.push_back(fmt3(st.frequency(0, static_cast<Relation>(r))));
      row.push_back(fmt3(st.frequency(1, static_cast<Relation>(r))));
    }
    rows.push_back(std::move(row));
  }
  return render_table(rows);
}

std::string corpus_stats_json(const NamedCorpusStats& sets) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, st] : sets) {
    j[name] = {{"real", st.n_real}, {"fake", st.n_fake}, {"total", st.total}, {"avg_edus", st.avg_edus}};
  }
  return j.dump(2);
}

std::string relation_stats_json(const NamedRelationStats& sets) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, st] : sets) {
    ordered_json set;
    for (int c = 0; c < 2; ++c) {
      ordered_json cls;
      cls["edges"] = st.totals[static_cast<std::size_t>(c)];
      ordered_json freq;
      for (std::size_t r = 0; r < kNumRelations; ++r) {
        freq[std::string(kRelationNames[r])] = st.frequency(c, static_cast<Relation>(r));
      }
      cls["frequency"] = std::move(freq);
      set[c ? "Fake" : "Real"] = std::move(cls);
    }
    j[name] = std::move(set);
  }
  return j.dump(2);
}

}  // namespace edu4fd
