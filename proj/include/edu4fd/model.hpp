#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edu4fd/corpus.hpp"
#include "edu4fd/discourse.hpp"
#include "edu4fd/tensor.hpp"

namespace edu4fd {

enum class Granularity { kEdu, kSentence };

std::string_view granularity_name(Granularity g);
Granularity parse_granularity(std::string_view s);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t emb_dim = 100;
  std::size_t gru_hidden = 64;  // per direction; EDU vectors have 2 * gru_hidden
  std::size_t filters = 100;    // m'
  std::size_t window = 3;
  std::size_t padding = 1;
  std::size_t n_bases = 8;
  std::size_t rgat_layers = 1;
  std::size_t fusion_hidden = 100;  // d_g
  double leaky_slope = 0.01;
  double attention_slope = 0.2;
  double dropout = 0.2;
  bool use_seq_branch = true;
  bool use_graph_branch = true;
  bool use_gru_ga = true;
  bool add_inverse = true;
  bool add_self = true;
  Granularity granularity = Granularity::kEdu;

  std::size_t edu_dim() const { return 2 * gru_hidden; }
  /// Width of the fused EDU matrix fed to the fusion stage.
  std::size_t fused_dim() const;
  /// Width of the text vector z.
  std::size_t text_dim() const;
  ChannelLayout channels() const { return {add_inverse, add_self}; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(std::string_view json_text);
/// Name of the first field that differs, or nullopt when equal.
std::optional<std::string> first_difference(const ModelConfig& a, const ModelConfig& b);

/// Input-major GRU weights: gate pre-activations are x W_x + b_x and
/// h W_h + b_h, with columns laid out as [reset | update | candidate].
struct GruParams {
  Tensor w_x;  // [in x 3h]
  Tensor w_h;  // [h x 3h]
  Tensor b_x;  // [1 x 3h]
  Tensor b_h;  // [1 x 3h]
};

struct RgatLayerParams {
  Tensor bases;      // [B x m' x in]
  Tensor coeffs;     // [channels x B]
  Tensor attention;  // [channels x 2m']
};

struct ModelParams {
  Tensor embedding;     // [|V| x emb]
  GruParams enc_fwd;
  GruParams enc_bwd;
  Tensor conv_filters;  // [m' x k x m]
  std::vector<RgatLayerParams> rgat;
  GruParams fusion;
  Tensor w_y;  // [2 x text_dim]
  Tensor b_y;  // [1 x 2]

  /// Every trainable tensor in a fixed declaration order; checkpoints and
  /// the optimizer rely on this order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  void zero_grad();
  bool all_finite() const;
};

/// Uniform(-0.05, 0.05) for embeddings and attention vectors, Glorot-style
/// uniform for gate, filter, basis, coefficient and classifier matrices,
/// zeros for biases.
ModelParams init_params(const ModelConfig& config, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Stage functions. Each registers nothing itself; callers pass Vars bound
// to the tape with bind().

struct BoundGru {
  Var w_x, w_h, b_x, b_h;
};

struct BoundRgatLayer {
  Var bases, coeffs, attention;
};

struct BoundParams {
  Var embedding;
  BoundGru enc_fwd, enc_bwd;
  Var conv_filters;
  std::vector<BoundRgatLayer> rgat;
  BoundGru fusion;
  Var w_y, b_y;
};

BoundParams bind(Tape& tape, ModelParams& params);

/// One GRU step: h' = n + z * (h - n) with n = tanh(x_n + r * (h W_hn + b_hn)).
/// `x_proj` is the precomputed 1 x 3h input projection.
Var gru_step(Var x_proj, Var h, const BoundGru& gru);

/// Hidden states of a unidirectional GRU over the rows of x, zero initial
/// state; reverse runs from the last row to the first but the result is
/// still indexed by row.
Var gru_sequence(Var x, const BoundGru& gru, bool reverse = false);

std::vector<std::vector<std::int64_t>> to_token_ids(const std::vector<Tokens>& edus, const Vocab& vocab);

/// BiGRU over each EDU's words, per-step concatenation, max-pool over steps.
Var encode_edus(Tape& tape, const BoundParams& p, const std::vector<std::vector<std::int64_t>>& token_ids);

/// TextCNN over the EDU sequence followed by LeakyReLU.
Var seq_features(Var x0, const BoundParams& p, const ModelConfig& config);

/// W^r = sum_b coeffs[r][b] * bases[b] for each listed channel, returned in
/// the same order.
std::vector<Var> relation_weights(const BoundRgatLayer& layer, const std::vector<std::size_t>& channels);

struct EdgeAttention {
  std::size_t layer = 0;
  std::size_t node = 0;  // receiving node u
  std::size_t channel = 0;
  std::vector<std::size_t> neighbors;
  std::vector<double> alpha;
};

/// One relation graph attention layer. For node u and active channel r,
/// e_uv = LeakyReLU_att(a_r . [W^r x_u || W^r x_v]), alpha = softmax over
/// N_r(u), and x'_u = LeakyReLU(sum_r sum_v alpha_uv W^r x_v).
Var rgat_layer(Tape& tape, Var x, const ExpandedGraph& graph, const BoundRgatLayer& layer, const ModelConfig& config,
               std::size_t layer_index = 0, std::vector<EdgeAttention>* attention = nullptr);

/// [X_C || X_G], or whichever branch is enabled.
Var fuse_concat(std::optional<Var> x_c, std::optional<Var> x_g);

struct Fusion {
  Var z;
  std::vector<double> alpha;  // empty for the max-pool ablation
};

/// GRU over the EDU rows in writing order, then global attention of every
/// hidden state against the last one.
Fusion gru_ga(Var x_gc, const BoundGru& gru);

/// softmax(W_y z + b_y); element 1 is P(fake).
Var classify(Var z, const BoundParams& p);

Var bce_loss(Var probs, int label);

struct ForwardResult {
  Var probs;
  Var z;
  Var x0;
  std::vector<EdgeAttention> edge_attention;
  std::vector<double> fusion_alpha;

  double p_fake() const { return probs.value().values[1]; }
};

enum class Mode { kTrain, kEval };

ForwardResult forward(Tape& tape, const ModelConfig& config, ModelParams& params, const Example& example,
                      const ExpandedGraph& graph, const Vocab& vocab, Mode mode, std::mt19937_64& rng);

/// Convenience wrapper: expands the example graph per the config and runs
/// an eval-mode forward on a private tape. Returns (P(real), P(fake)).
std::pair<double, double> predict_proba(const ModelConfig& config, ModelParams& params, const Example& example,
                                        const Vocab& vocab);

// ---------------------------------------------------------------------------
// Ablation variants

enum class Variant { kFull, kNoEdu, kNoRgat, kNoC, kNoG, kNoCNoG };

inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoEdu, Variant::kNoRgat,
                                           Variant::kNoC,  Variant::kNoG,   Variant::kNoCNoG};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);

/// Model flags for a variant, starting from the full-model config.
ModelConfig apply_variant(ModelConfig base, Variant v);

/// Pipeline for a variant: the no-edu variant segments by sentence and
/// connects every sentence pair.
PipelineOptions variant_pipeline(const PipelineOptions& base, Variant v);

}  // namespace edu4fd
