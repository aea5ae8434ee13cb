#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edu4fd/corpus.hpp"
#include "edu4fd/discourse.hpp"
#include "edu4fd/model.hpp"

namespace edu4fd {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> grad_clip;  // max global L2 norm

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(std::string_view json_text);

/// A non-finite loss or parameter was produced.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string doc_id, const std::string& what)
      : std::runtime_error(what), doc_id_(std::move(doc_id)) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Applies one Adam update from the gradients held in params.
void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradients(ModelParams& params, double max_norm);

/// Everything needed to train on a fixed set of examples.
struct TrainingContext {
  const ModelConfig& config;
  const Vocab& vocab;
  std::mt19937_64& rng;
};

/// Mean per-document loss of one mini-batch followed by one optimizer
/// step. Each document runs on its own tape and adds loss / |batch| to the
/// parameter gradients.
double train_step(const std::vector<const Example*>& batch, const std::vector<const ExpandedGraph*>& graphs,
                  ModelParams& params, AdamState& optimizer, const TrainConfig& train_config, TrainingContext ctx);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
  double val_accuracy = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch completes
};

std::string history_json(const History& h);

struct TrainResult {
  ModelParams params;  // parameters of the best validation epoch
  ModelParams final_params;
  History history;
  AdamState optimizer;
  std::string rng_state;
};

/// Mini-batch training with per-epoch shuffling under train_config.seed.
/// Keeps the parameters of the epoch with the highest validation macro-F1
/// (earliest on ties; the final epoch when val is empty).
TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set, const Vocab& vocab,
                  const ModelConfig& config, const TrainConfig& train_config, std::optional<ModelParams> init = {});

// ---------------------------------------------------------------------------
// Checkpoints

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  ModelParams params;
  Vocab vocab;
  AdamState optimizer;
  std::size_t epoch = 0;
  std::string rng_state;
};

/// Layout: 8-byte magic "EDU4FDCK", u32 version, u64 metadata length, JSON
/// metadata, then every parameter array followed by the Adam first and
/// second moments, as little-endian f64 in declared order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also rejects a checkpoint whose config differs from `expected`, naming
/// the first differing field.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace edu4fd
