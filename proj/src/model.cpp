#include "edu4fd/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace edu4fd {

std::string_view granularity_name(Granularity g) { return g == Granularity::kEdu ? "edu" : "sentence"; }

Granularity parse_granularity(std::string_view s) {
  if (s == "edu") return Granularity::kEdu;
  if (s == "sentence") return Granularity::kSentence;
  throw std::invalid_argument("unknown granularity '" + std::string(s) + "' (edu|sentence)");
}

std::size_t ModelConfig::fused_dim() const {
  return (use_seq_branch ? filters : 0) + (use_graph_branch ? filters : 0);
}

std::size_t ModelConfig::text_dim() const { return use_gru_ga ? fusion_hidden : fused_dim(); }

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model config field '" + field + "': " + why);
  };
  if (vocab_size < 2) fail("vocab_size", "must include PAD and UNK");
  if (emb_dim == 0) fail("emb_dim", "must be positive");
  if (gru_hidden == 0) fail("gru_hidden", "must be positive");
  if (filters == 0) fail("filters", "must be positive");
  if (window != 3) fail("window", "must be 3");
  if (padding != 1) fail("padding", "must be 1");
  if (n_bases == 0) fail("n_bases", "must be >= 1");
  if (n_bases > channels().count()) {
    fail("n_bases", "must not exceed the " + std::to_string(channels().count()) + " relation channels");
  }
  if (rgat_layers == 0) fail("rgat_layers", "must be >= 1");
  if (fusion_hidden == 0) fail("fusion_hidden", "must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) fail("leaky_slope", "must lie in [0, 1)");
  if (!(attention_slope >= 0.0 && attention_slope < 1.0)) fail("attention_slope", "must lie in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must lie in [0, 1)");
  if (!use_seq_branch && !use_graph_branch) fail("use_seq_branch", "at least one branch must be enabled");
}

namespace {

nlohmann::ordered_json config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["emb_dim"] = c.emb_dim;
  j["gru_hidden"] = c.gru_hidden;
  j["filters"] = c.filters;
  j["window"] = c.window;
  j["padding"] = c.padding;
  j["n_bases"] = c.n_bases;
  j["rgat_layers"] = c.rgat_layers;
  j["fusion_hidden"] = c.fusion_hidden;
  j["leaky_slope"] = c.leaky_slope;
  j["attention_slope"] = c.attention_slope;
  j["dropout"] = c.dropout;
  j["use_seq_branch"] = c.use_seq_branch;
  j["use_graph_branch"] = c.use_graph_branch;
  j["use_gru_ga"] = c.use_gru_ga;
  j["add_inverse"] = c.add_inverse;
  j["add_self"] = c.add_self;
  j["granularity"] = std::string(granularity_name(c.granularity));
  return j;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) { return config_json(c).dump(); }

ModelConfig model_config_from_json(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("vocab_size", c.vocab_size);
  get("emb_dim", c.emb_dim);
  get("gru_hidden", c.gru_hidden);
  get("filters", c.filters);
  get("window", c.window);
  get("padding", c.padding);
  get("n_bases", c.n_bases);
  get("rgat_layers", c.rgat_layers);
  get("fusion_hidden", c.fusion_hidden);
  get("leaky_slope", c.leaky_slope);
  get("attention_slope", c.attention_slope);
  get("dropout", c.dropout);
  get("use_seq_branch", c.use_seq_branch);
  get("use_graph_branch", c.use_graph_branch);
  get("use_gru_ga", c.use_gru_ga);
  get("add_inverse", c.add_inverse);
  get("add_self", c.add_self);
  if (j.contains("granularity")) c.granularity = parse_granularity(j.at("granularity").get<std::string>());
  return c;
}

std::optional<std::string> first_difference(const ModelConfig& a, const ModelConfig& b) {
  const auto ja = config_json(a);
  const auto jb = config_json(b);
  for (auto it = ja.begin(); it != ja.end(); ++it) {
    if (jb.at(it.key()) != it.value()) return it.key();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values) v = u(rng);
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

GruParams init_gru(std::size_t in, std::size_t h, std::mt19937_64& rng) {
  GruParams g;
  g.w_x = Tensor::matrix(in, 3 * h);
  g.w_h = Tensor::matrix(h, 3 * h);
  g.b_x = Tensor::matrix(1, 3 * h);
  g.b_h = Tensor::matrix(1, 3 * h);
  fill_uniform(g.w_x, glorot(in, h), rng);
  fill_uniform(g.w_h, glorot(h, h), rng);
  return g;
}

void append_gru(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix, GruParams& g) {
  out.emplace_back(prefix + ".w_x", &g.w_x);
  out.emplace_back(prefix + ".w_h", &g.w_h);
  out.emplace_back(prefix + ".b_x", &g.b_x);
  out.emplace_back(prefix + ".b_h", &g.b_h);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embedding", &embedding);
  append_gru(out, "encoder.forward", enc_fwd);
  append_gru(out, "encoder.backward", enc_bwd);
  out.emplace_back("cnn.filters", &conv_filters);
  for (std::size_t l = 0; l < rgat.size(); ++l) {
    const std::string p = "rgat." + std::to_string(l);
    out.emplace_back(p + ".bases", &rgat[l].bases);
    out.emplace_back(p + ".coeffs", &rgat[l].coeffs);
    out.emplace_back(p + ".attention", &rgat[l].attention);
  }
  append_gru(out, "fusion", fusion);
  out.emplace_back("classifier.w_y", &w_y);
  out.emplace_back("classifier.b_y", &b_y);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named()) t->zero_grad();
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : named())
    if (!t->all_finite()) return false;
  return true;
}

ModelParams init_params(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  ModelParams p;
  const std::size_t m = config.edu_dim(), mp = config.filters, C = config.channels().count(), B = config.n_bases;
  p.embedding = Tensor::matrix(config.vocab_size, config.emb_dim);
  fill_uniform(p.embedding, 0.05, rng);
  p.enc_fwd = init_gru(config.emb_dim, config.gru_hidden, rng);
  p.enc_bwd = init_gru(config.emb_dim, config.gru_hidden, rng);
  p.conv_filters = Tensor({mp, config.window, m});
  fill_uniform(p.conv_filters, glorot(config.window * m, mp), rng);
  for (std::size_t l = 0; l < config.rgat_layers; ++l) {
    const std::size_t in = l == 0 ? m : mp;
    RgatLayerParams layer;
    layer.bases = Tensor({B, mp, in});
    fill_uniform(layer.bases, glorot(in, mp), rng);
    layer.coeffs = Tensor::matrix(C, B);
    fill_uniform(layer.coeffs, glorot(B, C), rng);
    layer.attention = Tensor::matrix(C, 2 * mp);
    fill_uniform(layer.attention, 0.05, rng);
    p.rgat.push_back(std::move(layer));
  }
  p.fusion = init_gru(config.fused_dim(), config.fusion_hidden, rng);
  p.w_y = Tensor::matrix(2, config.text_dim());
  fill_uniform(p.w_y, glorot(config.text_dim(), 2), rng);
  p.b_y = Tensor::matrix(1, 2);
  p.zero_grad();
  return p;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

BoundGru bind_gru(Tape& tape, GruParams& g) {
  return {tape.parameter(g.w_x), tape.parameter(g.w_h), tape.parameter(g.b_x), tape.parameter(g.b_h)};
}

}  // namespace

BoundParams bind(Tape& tape, ModelParams& params) {
  BoundParams b;
  b.embedding = tape.parameter(params.embedding);
  b.enc_fwd = bind_gru(tape, params.enc_fwd);
  b.enc_bwd = bind_gru(tape, params.enc_bwd);
  b.conv_filters = tape.parameter(params.conv_filters);
  for (auto& layer : params.rgat) {
    b.rgat.push_back({tape.parameter(layer.bases), tape.parameter(layer.coeffs), tape.parameter(layer.attention)});
  }
  b.fusion = bind_gru(tape, params.fusion);
  b.w_y = tape.parameter(params.w_y);
  b.b_y = tape.parameter(params.b_y);
  return b;
}

Var gru_step(Var x_proj, Var h, const BoundGru& gru) {
  const std::size_t H = h.cols();
  Var gh = add(matmul(h, gru.w_h), gru.b_h);
  Var r = sigmoid(add(slice_cols(x_proj, 0, H), slice_cols(gh, 0, H)));
  Var z = sigmoid(add(slice_cols(x_proj, H, 2 * H), slice_cols(gh, H, 2 * H)));
  Var n = tanh(add(slice_cols(x_proj, 2 * H, 3 * H), mul(r, slice_cols(gh, 2 * H, 3 * H))));
  return add(n, mul(z, sub(h, n)));
}

Var gru_sequence(Var x, const BoundGru& gru, bool reverse) {
  Tape& tape = *x.tape();
  const std::size_t T = x.rows();
  const std::size_t H = gru.w_h.rows();
  Var proj = add(matmul(x, gru.w_x), gru.b_x);
  Var h = tape.constant(Tensor::matrix(1, H));
  std::vector<Var> states(T);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    h = gru_step(row(proj, t), h, gru);
    states[t] = h;
  }
  return stack_rows(states);
}

std::vector<std::vector<std::int64_t>> to_token_ids(const std::vector<Tokens>& edus, const Vocab& vocab) {
  std::vector<std::vector<std::int64_t>> ids;
  ids.reserve(edus.size());
  for (const auto& e : edus) {
    std::vector<std::int64_t> row;
    row.reserve(e.size());
    for (const auto& t : e) row.push_back(vocab.lookup(t));
    ids.push_back(std::move(row));
  }
  return ids;
}

Var encode_edus(Tape& /*tape*/, const BoundParams& p, const std::vector<std::vector<std::int64_t>>& token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("encode_edus: document has no EDUs");
  const std::size_t V = p.embedding.rows();
  std::vector<Var> rows;
  rows.reserve(token_ids.size());
  for (std::size_t j = 0; j < token_ids.size(); ++j) {
    if (token_ids[j].empty()) throw std::invalid_argument("encode_edus: EDU " + std::to_string(j) + " is empty");
    std::vector<std::size_t> idx;
    for (auto id : token_ids[j]) {
      if (id < 0 || static_cast<std::size_t>(id) >= V) throw std::out_of_range("encode_edus: token id out of range");
      idx.push_back(static_cast<std::size_t>(id));
    }
    Var words = gather_rows(p.embedding, idx);
    Var fwd = gru_sequence(words, p.enc_fwd, false);
    Var bwd = gru_sequence(words, p.enc_bwd, true);
    rows.push_back(max_pool_rows(concat_cols(fwd, bwd)));
  }
  return stack_rows(rows);
}

Var seq_features(Var x0, const BoundParams& p, const ModelConfig& config) {
  return leaky_relu(conv1d_seq(x0, p.conv_filters, config.padding), config.leaky_slope);
}

std::vector<Var> relation_weights(const BoundRgatLayer& layer, const std::vector<std::size_t>& channels) {
  std::vector<Var> out;
  out.reserve(channels.size());
  for (std::size_t c : channels) out.push_back(basis_combine(layer.coeffs, layer.bases, c));
  return out;
}

Var rgat_layer(Tape& tape, Var x, const ExpandedGraph& graph, const BoundRgatLayer& layer, const ModelConfig& config,
               std::size_t layer_index, std::vector<EdgeAttention>* attention) {
  const std::size_t n = x.rows();
  if (graph.n_nodes() != n) {
    throw std::invalid_argument("rgat_layer: graph has " + std::to_string(graph.n_nodes()) + " nodes but features have " +
                                std::to_string(n) + " rows");
  }
  const std::size_t mp = layer.bases.value().shape[1];
  const std::vector<std::size_t>& channels = graph.channels();
  const std::vector<Var> weights = relation_weights(layer, channels);

  struct ChannelCache {
    Var proj;       // X W^T, [n x m']
    Var score_self; // [n x 1]
    Var score_nbr;  // [n x 1]
  };
  std::vector<ChannelCache> cache;
  cache.reserve(channels.size());
  for (std::size_t k = 0; k < channels.size(); ++k) {
    Var proj = matmul(x, transpose(weights[k]));
    Var a = row(layer.attention, channels[k]);
    Var a_self = transpose(slice_cols(a, 0, mp));
    Var a_nbr = transpose(slice_cols(a, mp, 2 * mp));
    cache.push_back({proj, matmul(proj, a_self), matmul(proj, a_nbr)});
  }
  auto slot = [&](std::size_t channel) {
    return static_cast<std::size_t>(std::lower_bound(channels.begin(), channels.end(), channel) - channels.begin());
  };

  std::vector<Var> out_rows;
  out_rows.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    std::optional<Var> total;
    for (const ChannelNeighbors& cn : graph.neighbors(u)) {
      const ChannelCache& cc = cache[slot(cn.channel)];
      Var scores = leaky_relu(add(gather_rows(cc.score_nbr, cn.nodes), row(cc.score_self, u)), config.attention_slope);
      Var alpha = softmax_vec(scores);
      Var msg = matmul(transpose(alpha), gather_rows(cc.proj, cn.nodes));
      total = total ? add(*total, msg) : msg;
      if (attention) {
        attention->push_back({layer_index, u, cn.channel, cn.nodes, alpha.value().values});
      }
    }
    if (!total) total = tape.constant(Tensor::matrix(1, mp));
    out_rows.push_back(*total);
  }
  return leaky_relu(stack_rows(out_rows), config.leaky_slope);
}

Var fuse_concat(std::optional<Var> x_c, std::optional<Var> x_g) {
  if (x_c && x_g) return concat_cols(*x_c, *x_g);
  if (x_c) return *x_c;
  if (x_g) return *x_g;
  throw std::invalid_argument("fuse_concat: both branches disabled");
}

Fusion gru_ga(Var x_gc, const BoundGru& gru) {
  if (x_gc.rows() == 0) throw std::invalid_argument("gru_ga: empty input");
  Var states = gru_sequence(x_gc, gru, false);
  Var last = row(states, states.rows() - 1);
  Var alpha = softmax_vec(matmul(states, transpose(last)));
  Fusion f{matmul(transpose(alpha), states), alpha.value().values};
  return f;
}

Var classify(Var z, const BoundParams& p) { return softmax_vec(add(matmul(z, transpose(p.w_y)), p.b_y)); }

Var bce_loss(Var probs, int label) { return binary_cross_entropy(probs, label); }

ForwardResult forward(Tape& tape, const ModelConfig& config, ModelParams& params, const Example& example,
                      const ExpandedGraph& graph, const Vocab& vocab, Mode mode, std::mt19937_64& rng) {
  const bool training = mode == Mode::kTrain;
  BoundParams p = bind(tape, params);
  ForwardResult r;
  r.x0 = encode_edus(tape, p, to_token_ids(example.edus, vocab));
  Var x0 = dropout(r.x0, config.dropout, training, rng);

  std::optional<Var> x_c, x_g;
  if (config.use_seq_branch) x_c = seq_features(x0, p, config);
  if (config.use_graph_branch) {
    Var h = x0;
    for (std::size_t l = 0; l < p.rgat.size(); ++l) h = rgat_layer(tape, h, graph, p.rgat[l], config, l, &r.edge_attention);
    x_g = h;
  }
  Var x_gc = fuse_concat(x_c, x_g);
  Var z;
  if (config.use_gru_ga) {
    Fusion f = gru_ga(x_gc, p.fusion);
    z = f.z;
    r.fusion_alpha = std::move(f.alpha);
  } else {
    z = max_pool_rows(x_gc);
  }
  r.z = z;
  r.probs = classify(dropout(z, config.dropout, training, rng), p);
  return r;
}

std::pair<double, double> predict_proba(const ModelConfig& config, ModelParams& params, const Example& example,
                                        const Vocab& vocab) {
  Tape tape;
  std::mt19937_64 rng(0);
  const ExpandedGraph g = expand_graph(example.graph, config.add_inverse, config.add_self);
  const ForwardResult r = forward(tape, config, params, example, g, vocab, Mode::kEval, rng);
  return {r.probs.value().values[0], r.probs.value().values[1]};
}

// ---------------------------------------------------------------------------

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoEdu: return "no-edu";
    case Variant::kNoRgat: return "no-rgat";
    case Variant::kNoC: return "no-c";
    case Variant::kNoG: return "no-g";
    case Variant::kNoCNoG: return "no-c-no-g";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

ModelConfig apply_variant(ModelConfig c, Variant v) {
  switch (v) {
    case Variant::kFull: break;
    case Variant::kNoEdu:
      c.granularity = Granularity::kSentence;
      c.add_inverse = false;
      break;
    case Variant::kNoRgat: c.use_graph_branch = false; break;
    case Variant::kNoC: c.use_seq_branch = false; break;
    case Variant::kNoG: c.use_gru_ga = false; break;
    case Variant::kNoCNoG:
      c.use_seq_branch = false;
      c.use_gru_ga = false;
      break;
  }
  c.n_bases = std::min(c.n_bases, c.channels().count());
  return c;
}

PipelineOptions variant_pipeline(const PipelineOptions& base, Variant v) {
  PipelineOptions o = base;
  if (v == Variant::kNoEdu) {
    o.segment_mode = SegmentMode::kSentence;
    o.graph_mode = GraphMode::kComplete;
  }
  return o;
}

}  // namespace edu4fd
