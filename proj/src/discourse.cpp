#include "edu4fd/discourse.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <tuple>

#include "edu4fd/log.hpp"
#include "json.hpp"

namespace edu4fd {

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += "; ";
    s += v[i];
  }
  return s;
}

std::string edge_str(const Edge& e) {
  return "(" + std::to_string(e.head) + ", " + std::to_string(e.dep) + ", " + std::string(relation_name(e.relation)) +
         ")";
}

}  // namespace

GraphError::GraphError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

GraphMode parse_graph_mode(std::string_view s) {
  if (s == "provided") return GraphMode::kProvided;
  if (s == "heuristic") return GraphMode::kHeuristic;
  if (s == "complete") return GraphMode::kComplete;
  throw std::invalid_argument("unknown graph mode '" + std::string(s) + "' (provided|heuristic|complete)");
}

std::string_view graph_mode_name(GraphMode m) {
  switch (m) {
    case GraphMode::kProvided: return "provided";
    case GraphMode::kHeuristic: return "heuristic";
    case GraphMode::kComplete: return "complete";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Relation heuristic_label(const Tokens& dep_edu, const Tokens& /*head_edu*/) {
  // Skip leading punctuation so ", but ..." and "\" because ..." still match.
  std::vector<std::string> lead;
  for (const auto& t : dep_edu) {
    const bool punct = std::none_of(t.begin(), t.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
    if (punct && lead.empty()) continue;
    lead.push_back(lowercase(t));
    if (lead.size() == 3) break;
  }
  if (lead.empty()) return Relation::kElaboration;
  const std::string& w0 = lead[0];
  const std::string w1 = lead.size() > 1 ? lead[1] : "";
  const std::string w2 = lead.size() > 2 ? lead[2] : "";
  auto any_of = [&](std::initializer_list<std::string_view> words) {
    return std::find(words.begin(), words.end(), w0) != words.end();
  };

  if (any_of({"because", "since", "as"})) return Relation::kCause;
  if (any_of({"if", "unless"})) return Relation::kCondition;
  if (any_of({"but", "however", "although", "yet", "whereas"})) return Relation::kContrast;
  if (any_of({"when", "while", "after", "before", "until", "then"})) return Relation::kTemporal;
  if ((w0 == "to" && looks_like_verb(w1)) || (w0 == "in" && w1 == "order" && w2 == "to")) {
    return Relation::kEnablement;
  }
  if (any_of({"said", "says", "say", "according", "reported", "told"})) return Relation::kAttribution;
  if (any_of({"and", "also", "moreover", "additionally"})) return Relation::kJoint;
  if ((w0 == "for" && w1 == "example") || (w0 == "such" && w1 == "as")) return Relation::kExplanation;
  if ((w0 == "in" && w1 == "summary") || w0 == "overall") return Relation::kSummary;
  if (any_of({"than", "compared", "like"})) return Relation::kComparison;
  return Relation::kElaboration;
}

ValidationReport validate_graph(const DiscourseGraph& graph, std::size_t n_edus) {
  ValidationReport rep;
  rep.cleaned.n_nodes = graph.n_nodes;
  if (graph.n_nodes != n_edus) {
    rep.errors.push_back("graph has " + std::to_string(graph.n_nodes) + " nodes but the document has " +
                         std::to_string(n_edus) + " EDUs");
  }
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    const Edge& e = graph.edges[k];
    const std::string where = "edge " + std::to_string(k) + " " + edge_str(e);
    if (static_cast<std::size_t>(e.relation) >= kNumRelations) {
      rep.errors.push_back(where + ": relation outside the taxonomy");
      continue;
    }
    if (e.head >= n_edus || e.dep >= n_edus) {
      rep.errors.push_back(where + ": index out of range for " + std::to_string(n_edus) + " EDUs");
      continue;
    }
    if (e.head == e.dep) {
      rep.errors.push_back(where + ": self edge");
      continue;
    }
    if (!seen.insert({e.head, e.dep, index_of(e.relation)}).second) {
      rep.warnings.push_back(where + ": duplicate edge removed");
      continue;
    }
    rep.cleaned.edges.push_back(e);
  }
  return rep;
}

DiscourseGraph remove_root(const DiscourseGraph& graph, std::size_t root_index) {
  if (root_index >= graph.n_nodes) {
    throw GraphError({"root index " + std::to_string(root_index) + " out of range for " +
                      std::to_string(graph.n_nodes) + " nodes"});
  }
  DiscourseGraph out;
  out.n_nodes = graph.n_nodes - 1;
  auto remap = [root_index](std::size_t i) { return i > root_index ? i - 1 : i; };
  for (const Edge& e : graph.edges) {
    if (e.head == root_index || e.dep == root_index) continue;
    if (e.relation == Relation::kRoot) {
      log::warn("dropping Root-labelled edge " + edge_str(e) + " not incident to the root node");
      continue;
    }
    out.edges.push_back({remap(e.head), remap(e.dep), e.relation});
  }
  return out;
}

void drop_edu(EDUSeq& seq, std::size_t index) {
  if (index >= seq.size()) throw std::out_of_range("drop_edu: index out of range");
  const auto at = static_cast<std::ptrdiff_t>(index);
  seq.edus.erase(seq.edus.begin() + at);
  if (index < seq.spans.size()) seq.spans.erase(seq.spans.begin() + at);
  if (index < seq.sentence_of.size()) seq.sentence_of.erase(seq.sentence_of.begin() + at);
}

DiscourseGraph build_graph(const Document& doc, const EDUSeq& seq, GraphMode mode) {
  DiscourseGraph g;
  g.n_nodes = seq.size();
  switch (mode) {
    case GraphMode::kProvided: {
      if (!doc.gold_edges) throw GraphError({"document '" + doc.id + "': provided mode requires gold edges"});
      DiscourseGraph raw{seq.size(), *doc.gold_edges};
      ValidationReport rep = validate_graph(raw, seq.size());
      if (!rep.ok()) {
        for (auto& e : rep.errors) e = "document '" + doc.id + "': " + e;
        throw GraphError(rep.errors);
      }
      for (const auto& w : rep.warnings) log::warn("document '" + doc.id + "': " + w);
      g = doc.root ? remove_root(rep.cleaned, *doc.root) : rep.cleaned;
      break;
    }
    case GraphMode::kHeuristic: {
      std::size_t sent_head = 0;
      for (std::size_t i = 1; i < seq.size(); ++i) {
        const bool new_sentence = i >= seq.sentence_of.size() || seq.sentence_of[i] != seq.sentence_of[i - 1];
        const std::size_t head = sent_head;
        if (new_sentence) sent_head = i;
        g.edges.push_back({head, i, heuristic_label(seq.edus[i], seq.edus[head])});
      }
      break;
    }
    case GraphMode::kComplete: {
      for (std::size_t h = 0; h < seq.size(); ++h)
        for (std::size_t d = 0; d < seq.size(); ++d)
          if (h != d) g.edges.push_back({h, d, kCompleteGraphRelation});
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

std::size_t ChannelLayout::inverse(Relation r) const {
  if (!add_inverse) throw std::logic_error("inverse channels are disabled");
  return kNumRelations + index_of(r);
}

std::size_t ChannelLayout::self() const {
  if (!add_self) throw std::logic_error("self channel is disabled");
  return kNumRelations * (add_inverse ? 2 : 1);
}

std::string ChannelLayout::name(std::size_t channel) const {
  if (channel < kNumRelations) return std::string(kRelationNames[channel]);
  if (add_inverse && channel < 2 * kNumRelations) return std::string(kRelationNames[channel - kNumRelations]) + "_inv";
  if (add_self && channel == self()) return "SELF";
  throw std::out_of_range("channel " + std::to_string(channel) + " out of range");
}

ExpandedGraph::ExpandedGraph(DiscourseGraph base, ChannelLayout layout)
    : base_(std::move(base)), layout_(layout), per_node_(base_.n_nodes) {
  // (receiver, channel) -> senders
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::size_t>> incoming;
  for (const Edge& e : base_.edges) {
    if (e.head >= base_.n_nodes || e.dep >= base_.n_nodes) throw GraphError({"edge " + edge_str(e) + " out of range"});
    incoming[{e.dep, layout_.base(e.relation)}].insert(e.head);
    if (layout_.add_inverse) incoming[{e.head, layout_.inverse(e.relation)}].insert(e.dep);
  }
  if (layout_.add_self) {
    for (std::size_t u = 0; u < base_.n_nodes; ++u) incoming[{u, layout_.self()}].insert(u);
  }
  std::set<std::size_t> active;
  for (const auto& [key, senders] : incoming) {
    per_node_[key.first].push_back({key.second, std::vector<std::size_t>(senders.begin(), senders.end())});
    active.insert(key.second);
  }
  channels_.assign(active.begin(), active.end());
}

std::vector<std::pair<std::size_t, std::size_t>> ExpandedGraph::channel_edges(std::size_t channel) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t u = 0; u < per_node_.size(); ++u) {
    for (const auto& cn : per_node_[u]) {
      if (cn.channel != channel) continue;
      for (std::size_t v : cn.nodes) out.emplace_back(v, u);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExpandedGraph expand_graph(const DiscourseGraph& graph, bool add_inverse, bool add_self) {
  return ExpandedGraph(graph, ChannelLayout{add_inverse, add_self});
}

// ---------------------------------------------------------------------------

std::optional<Example> prepare_example(const Document& doc, const PipelineOptions& options, const CueLexicon& lexicon) {
  Document src = doc;
  if (options.segment_mode != SegmentMode::kGold && src.text.find_first_not_of(" \t\r\n") == std::string::npos &&
      src.gold_edus) {
    for (std::size_t k = 0; k < src.gold_edus->size(); ++k) {
      if (src.root && *src.root == k) continue;
      if (!src.text.empty()) src.text += ' ';
      src.text += join_tokens((*src.gold_edus)[k]);
    }
  }
  EDUSeq seq = segment_edus(src, options.segment_mode, options.max_edu_len, lexicon);

  // A flagged root is only meaningful for the imported segmentation.
  const bool has_root = options.segment_mode == SegmentMode::kGold && src.root.has_value();
  if (options.graph_mode != GraphMode::kProvided && has_root) {
    drop_edu(seq, *src.root);
  }
  DiscourseGraph g;
  if (options.graph_mode == GraphMode::kProvided) {
    if (options.segment_mode != SegmentMode::kGold) {
      throw GraphError({"document '" + doc.id + "': provided graphs require gold segmentation"});
    }
    g = build_graph(src, seq, GraphMode::kProvided);
    if (has_root) drop_edu(seq, *src.root);
  } else {
    if (!edu_count_filter(seq)) return std::nullopt;
    g = build_graph(src, seq, options.graph_mode);
  }
  if (!edu_count_filter(seq)) return std::nullopt;
  return Example{doc.id, doc.label, std::move(seq.edus), std::move(g)};
}

PreparedCorpus prepare_corpus(const Corpus& corpus, const PipelineOptions& options, const CueLexicon& lexicon) {
  PreparedCorpus out;
  for (const auto& doc : corpus.documents) {
    auto ex = prepare_example(doc, options, lexicon);
    if (ex) {
      out.examples.push_back(std::move(*ex));
    } else {
      ++out.dropped_short;
    }
  }
  return out;
}

std::string graph_to_json(const DiscourseGraph& graph) {
  nlohmann::ordered_json j;
  j["n_nodes"] = graph.n_nodes;
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const Edge& e : graph.edges) {
    edges.push_back({{"head", e.head}, {"dep", e.dep}, {"rel", std::string(relation_name(e.relation))}});
  }
  j["edges"] = std::move(edges);
  return j.dump();
}

DiscourseGraph graph_from_json(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  DiscourseGraph g;
  g.n_nodes = j.at("n_nodes").get<std::size_t>();
  for (const auto& e : j.at("edges")) {
    const std::string rel = e.at("rel").get<std::string>();
    const auto r = parse_relation(rel);
    if (!r) throw GraphError({"unknown relation '" + rel + "'"});
    g.edges.push_back({e.at("head").get<std::size_t>(), e.at("dep").get<std::size_t>(), *r});
  }
  return g;
}

}  // namespace edu4fd
