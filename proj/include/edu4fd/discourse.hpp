#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edu4fd/corpus.hpp"
#include "edu4fd/relation.hpp"
#include "edu4fd/segmenter.hpp"

namespace edu4fd {

class GraphError : public std::runtime_error {
 public:
  explicit GraphError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using Edge = GoldEdge;

/// EDU dependency graph. Edges point head -> dependent.
struct DiscourseGraph {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;

  bool operator==(const DiscourseGraph&) const = default;
};

enum class GraphMode { kProvided, kHeuristic, kComplete };

GraphMode parse_graph_mode(std::string_view s);
std::string_view graph_mode_name(GraphMode m);

/// Relation used for every edge of the fully connected graph.
inline constexpr Relation kCompleteGraphRelation = Relation::kJoint;

/// First matching cue on the dependent's leading tokens; Elaboration when
/// nothing matches.
Relation heuristic_label(const Tokens& dep_edu, const Tokens& head_edu);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  DiscourseGraph cleaned;  // duplicates removed

  bool ok() const { return errors.empty(); }
};

ValidationReport validate_graph(const DiscourseGraph& graph, std::size_t n_edus);

/// Deletes the root node and its incident edges and compacts indices.
/// Any other Root-labelled edge is dropped as well.
DiscourseGraph remove_root(const DiscourseGraph& graph, std::size_t root_index);

/// provided: validated gold edges with a flagged root removed (the root EDU
/// must be dropped from `seq` by the caller, see drop_edu). heuristic: each
/// non-initial EDU of a sentence depends on the sentence's first EDU, and
/// each sentence's first EDU on the previous sentence's first EDU.
/// complete: every ordered pair under kCompleteGraphRelation.
DiscourseGraph build_graph(const Document& doc, const EDUSeq& seq, GraphMode mode);

void drop_edu(EDUSeq& seq, std::size_t index);

// ---------------------------------------------------------------------------
// Relation channels

/// Fixed channel numbering shared by graphs and model parameters: base
/// relations in taxonomy order, then their inverses, then SELF.
struct ChannelLayout {
  bool add_inverse = true;
  bool add_self = true;

  std::size_t count() const { return kNumRelations * (add_inverse ? 2 : 1) + (add_self ? 1 : 0); }
  std::size_t base(Relation r) const { return index_of(r); }
  std::size_t inverse(Relation r) const;
  std::size_t self() const;
  std::string name(std::size_t channel) const;

  bool operator==(const ChannelLayout&) const = default;
};

struct ChannelNeighbors {
  std::size_t channel = 0;
  std::vector<std::size_t> nodes;  // ascending node index
};

/// Graph with inverse/self channels materialised as per-node neighbour
/// lists. Node u receives messages from v in channel c when v is in
/// neighbors(u) under c.
class ExpandedGraph {
 public:
  ExpandedGraph() = default;
  ExpandedGraph(DiscourseGraph base, ChannelLayout layout);

  const DiscourseGraph& base() const { return base_; }
  const ChannelLayout& layout() const { return layout_; }
  std::size_t n_nodes() const { return base_.n_nodes; }

  /// Active channels, ascending.
  const std::vector<std::size_t>& channels() const { return channels_; }
  /// Channels with at least one neighbour of u, ascending by channel.
  const std::vector<ChannelNeighbors>& neighbors(std::size_t u) const { return per_node_[u]; }
  /// (head, dep) pairs of one channel, sorted.
  std::vector<std::pair<std::size_t, std::size_t>> channel_edges(std::size_t channel) const;

 private:
  DiscourseGraph base_;
  ChannelLayout layout_;
  std::vector<std::size_t> channels_;
  std::vector<std::vector<ChannelNeighbors>> per_node_;
};

ExpandedGraph expand_graph(const DiscourseGraph& graph, bool add_inverse, bool add_self);

// ---------------------------------------------------------------------------
// Document preparation

struct PipelineOptions {
  SegmentMode segment_mode = SegmentMode::kGold;
  GraphMode graph_mode = GraphMode::kProvided;
  std::size_t max_edu_len = kDefaultMaxEduLen;
};

/// A document ready for the model: EDU tokens in writing order and a
/// validated graph over them.
struct Example {
  std::string id;
  int label = 0;
  std::vector<Tokens> edus;
  DiscourseGraph graph;
};

/// Segments and builds the graph. Returns nullopt when the document has
/// fewer than 2 EDUs after segmentation. In sentence mode a document with
/// empty text is segmented from its joined gold EDUs.
std::optional<Example> prepare_example(const Document& doc, const PipelineOptions& options,
                                       const CueLexicon& lexicon = CueLexicon::builtin());

struct PreparedCorpus {
  std::vector<Example> examples;
  std::size_t dropped_short = 0;
};

PreparedCorpus prepare_corpus(const Corpus& corpus, const PipelineOptions& options,
                              const CueLexicon& lexicon = CueLexicon::builtin());

std::string graph_to_json(const DiscourseGraph& graph);
DiscourseGraph graph_from_json(std::string_view json_text);

}  // namespace edu4fd
