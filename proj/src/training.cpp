#include "edu4fd/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "edu4fd/evaluation.hpp"
#include "edu4fd/log.hpp"
#include "json.hpp"

namespace edu4fd {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train config field '" + field + "': " + why);
  };
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr", "must be a finite non-negative number");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (epochs == 0) fail("epochs", "must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps", "must be positive");
  if (grad_clip && !(*grad_clip >= 0.0)) fail("grad_clip", "must be non-negative");
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["optimizer"] = "adam";
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["grad_clip"] = c.grad_clip ? nlohmann::ordered_json(*c.grad_clip) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

TrainConfig train_config_from_json(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lr", c.lr);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("seed", c.seed);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("eps", c.eps);
  if (j.contains("optimizer") && j.at("optimizer") != "adam") {
    throw std::invalid_argument("train config field 'optimizer': only adam is supported");
  }
  if (j.contains("grad_clip") && !j.at("grad_clip").is_null()) c.grad_clip = j.at("grad_clip").get<double>();
  return c;
}

// ---------------------------------------------------------------------------

void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config) {
  auto named = params.named();
  if (state.m.empty()) {
    for (const auto& [name, t] : named) {
      state.m.emplace_back(t->size(), 0.0);
      state.v.emplace_back(t->size(), 0.0);
    }
  }
  if (state.m.size() != named.size()) throw std::logic_error("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < named.size(); ++k) {
    Tensor& p = *named[k].second;
    if (p.grad.size() != p.size()) p.zero_grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.values[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

double clip_gradients(ModelParams& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params.named())
    for (double g : t->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = norm > 0.0 ? max_norm / norm : 0.0;
    for (auto& [name, t] : params.named())
      for (double& g : t->grad) g *= f;
  }
  return norm;
}

double train_step(const std::vector<const Example*>& batch, const std::vector<const ExpandedGraph*>& graphs,
                  ModelParams& params, AdamState& optimizer, const TrainConfig& train_config, TrainingContext ctx) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  params.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = *batch[i];
    Tape tape;
    ForwardResult r = forward(tape, ctx.config, params, ex, *graphs[i], ctx.vocab, Mode::kTrain, ctx.rng);
    Var loss = bce_loss(r.probs, ex.label);
    const double l = loss.scalar();
    if (!std::isfinite(l)) throw NonFiniteError(ex.id, "non-finite loss on document '" + ex.id + "'");
    total += l;
    tape.backward(scale(loss, inv));
  }
  if (train_config.grad_clip) clip_gradients(params, *train_config.grad_clip);
  adam_step(params, optimizer, train_config);
  if (!params.all_finite()) {
    throw NonFiniteError(batch.back()->id, "non-finite parameters after the batch ending at '" + batch.back()->id + "'");
  }
  return total * inv;
}

std::string history_json(const History& h) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_f1", e.val_f1},
                      {"val_accuracy", e.val_accuracy}});
  }
  j["epochs"] = std::move(epochs);
  j["best_epoch"] = h.best_epoch;
  return j.dump(2);
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set, const Vocab& vocab,
                  const ModelConfig& config, const TrainConfig& train_config, std::optional<ModelParams> init) {
  config.validate();
  train_config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (config.vocab_size != vocab.size()) {
    throw std::invalid_argument("train: config vocab_size " + std::to_string(config.vocab_size) +
                                " does not match vocabulary size " + std::to_string(vocab.size()));
  }

  std::mt19937_64 rng(train_config.seed);
  TrainResult result;
  result.final_params = init ? std::move(*init) : init_params(config, rng);
  ModelParams& params = result.final_params;
  result.params = params;

  std::vector<ExpandedGraph> graphs;
  graphs.reserve(train_set.size());
  for (const auto& ex : train_set) graphs.push_back(expand_graph(ex.graph, config.add_inverse, config.add_self));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_f1 = -1.0;
  TrainingContext ctx{config, vocab, rng};

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), start + train_config.batch_size);
      std::vector<const Example*> batch;
      std::vector<const ExpandedGraph*> batch_graphs;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        batch_graphs.push_back(&graphs[order[i]]);
      }
      loss_sum += train_step(batch, batch_graphs, params, result.optimizer, train_config, ctx) *
                  static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val_set.empty()) {
      const Evaluation ev = evaluate(config, params, vocab, val_set);
      rec.val_loss = ev.mean_loss;
      rec.val_f1 = ev.metrics.f1;
      rec.val_accuracy = ev.metrics.accuracy;
    }
    result.history.epochs.push_back(rec);
    const bool better = val_set.empty() ? true : rec.val_f1 > best_f1;
    if (better) {
      best_f1 = rec.val_f1;
      result.history.best_epoch = epoch;
      result.params = params;
    }
    log::info("epoch " + std::to_string(epoch) + " train_loss=" + std::to_string(rec.train_loss) +
              " val_loss=" + std::to_string(rec.val_loss) + " val_f1=" + std::to_string(rec.val_f1));
  }
  std::ostringstream os;
  os << rng;
  result.rng_state = os.str();
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'E', 'D', 'U', '4', 'F', 'D', 'C', 'K'};

template <typename T>
void put_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes, sizeof bytes);
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return true;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) put_le(out, std::bit_cast<std::uint64_t>(d));
}

void get_doubles(std::istream& in, std::vector<double>& v, const std::string& what) {
  for (double& d : v) {
    std::uint64_t bits = 0;
    if (!get_le(in, bits)) throw CheckpointError("checkpoint truncated while reading " + what);
    d = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto named = const_cast<ModelParams&>(ckpt.params).named();
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(model_config_to_json(ckpt.config));
  meta["vocab"] = ckpt.vocab.tokens();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& [name, t] : named) params.push_back({{"name", name}, {"shape", t->shape}});
  meta["params"] = std::move(params);
  const bool has_moments = !ckpt.optimizer.m.empty();
  meta["optimizer"] = {{"type", "adam"}, {"step", ckpt.optimizer.step}, {"has_moments", has_moments}};
  meta["epoch"] = ckpt.epoch;
  meta["rng_state"] = ckpt.rng_state;
  const std::string meta_text = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, ckpt.version);
  put_le<std::uint64_t>(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  for (const auto& [name, t] : named) put_doubles(out, t->values);
  if (has_moments) {
    if (ckpt.optimizer.m.size() != named.size()) throw CheckpointError("optimizer state does not match parameters");
    for (const auto& m : ckpt.optimizer.m) put_doubles(out, m);
    for (const auto& v : ckpt.optimizer.v) put_doubles(out, v);
  }
  if (!out) throw IoError("write error on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  if (!get_le(in, ckpt.version)) throw CheckpointError("checkpoint truncated in header");
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(ckpt.version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t meta_len = 0;
  if (!get_le(in, meta_len)) throw CheckpointError("checkpoint truncated in header");
  if (meta_len > (1ull << 32)) throw CheckpointError("checkpoint metadata length is implausible");
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), static_cast<std::streamsize>(meta_len))) {
    throw CheckpointError("checkpoint truncated in metadata");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
    ckpt.config = model_config_from_json(meta.at("config").dump());
    ckpt.vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    ckpt.optimizer.step = meta.at("optimizer").at("step").get<std::uint64_t>();
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.rng_state = meta.at("rng_state").get<std::string>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }

  std::mt19937_64 scratch(0);
  try {
    ckpt.params = init_params(ckpt.config, scratch);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  auto named = ckpt.params.named();
  const auto& declared = meta.at("params");
  if (declared.size() != named.size()) throw CheckpointError("checkpoint parameter list does not match its config");
  for (std::size_t k = 0; k < named.size(); ++k) {
    if (declared[k].at("name").get<std::string>() != named[k].first ||
        declared[k].at("shape").get<Shape>() != named[k].second->shape) {
      throw CheckpointError("checkpoint parameter '" + declared[k].at("name").get<std::string>() +
                            "' does not match the layout implied by its config");
    }
  }
  for (auto& [name, t] : named) get_doubles(in, t->values, name);
  ckpt.params.zero_grad();
  if (meta.at("optimizer").at("has_moments").get<bool>()) {
    for (auto& [name, t] : named) ckpt.optimizer.m.emplace_back(t->size());
    for (auto& [name, t] : named) ckpt.optimizer.v.emplace_back(t->size());
    for (std::size_t k = 0; k < named.size(); ++k) get_doubles(in, ckpt.optimizer.m[k], "adam m " + named[k].first);
    for (std::size_t k = 0; k < named.size(); ++k) get_doubles(in, ckpt.optimizer.v[k], "adam v " + named[k].first);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (auto field = first_difference(ckpt.config, expected)) {
    throw CheckpointError("checkpoint config differs in field '" + *field + "'");
  }
  return ckpt;
}

}  // namespace edu4fd
