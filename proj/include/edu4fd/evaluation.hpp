#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "edu4fd/corpus.hpp"
#include "edu4fd/discourse.hpp"
#include "edu4fd/model.hpp"

namespace edu4fd {

struct TrainConfig;

/// Binary confusion counts with fake (label 1) as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(int gold, int predicted);
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro

  bool operator==(const Metrics&) const = default;
};

/// Per-class precision, recall and F1 for both classes, averaged with equal
/// weight. A zero denominator yields 0 and a warning.
Metrics macro_metrics(const Confusion& c);

/// Argmax of (P(real), P(fake)); ties go to real.
int decide(double p_real, double p_fake);

struct Prediction {
  std::string id;
  int gold = 0;
  int label = 0;
  double p_real = 0.0;
  double p_fake = 0.0;
  double loss = 0.0;
  std::vector<double> z;
  std::vector<EdgeAttention> edge_attention;
  std::vector<double> fusion_alpha;
};

Prediction predict(const ModelConfig& config, ModelParams& params, const Vocab& vocab, const Example& example);

struct Evaluation {
  Confusion confusion;
  Metrics metrics;
  double mean_loss = 0.0;
};

Evaluation evaluate(const ModelConfig& config, ModelParams& params, const Vocab& vocab,
                    const std::vector<Example>& examples);

struct MetricSummary {
  Metrics mean;
  Metrics stddev;  // sample standard deviation; 0 for a single trial
  std::vector<Metrics> trials;
};

MetricSummary summarize(const std::vector<Metrics>& trials);

using NamedExamples = std::vector<std::pair<std::string, std::vector<Example>>>;
using NamedSummaries = std::vector<std::pair<std::string, MetricSummary>>;

struct TrialData {
  std::vector<Example> train;
  std::vector<Example> val;
  NamedExamples tests;
};

inline constexpr std::size_t kDefaultTrials = 5;

/// Trains `trials` models with seeds base_seed + i on fixed splits and
/// evaluates each on every test set. The vocabulary comes from the
/// training examples only.
NamedSummaries run_trials(const TrialData& data, const ModelConfig& config, const TrainConfig& train_config,
                          std::size_t trials = kDefaultTrials, std::size_t min_count = 1);

struct RawSplits {
  Corpus train;
  Corpus val;
  std::vector<std::pair<std::string, Corpus>> tests;
};

struct AblationRow {
  Variant variant = Variant::kFull;
  NamedSummaries results;
};

/// Runs the full model and its five ablations under identical seeds.
std::vector<AblationRow> ablation_suite(const RawSplits& data, const PipelineOptions& pipeline,
                                        const ModelConfig& base, const TrainConfig& train_config,
                                        std::size_t trials = 1, std::size_t min_count = 1);

std::vector<Tokens> example_tokens(const std::vector<Example>& examples);

// Reports and exports.

std::string metrics_json(const NamedSummaries& results);
std::string ablation_json(const std::vector<AblationRow>& rows);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

/// Tab-separated: id, gold label, predicted label, then the text vector z.
void export_embeddings(const ModelConfig& config, ModelParams& params, const Vocab& vocab,
                       const std::vector<Example>& examples, const std::filesystem::path& path);

/// JSON with per-edge graph attention and per-EDU fusion weights.
std::string attention_json(const ModelConfig& config, const Example& example, const Prediction& prediction);
void export_attention(const ModelConfig& config, ModelParams& params, const Vocab& vocab, const Example& example,
                      const std::filesystem::path& path);

}  // namespace edu4fd
