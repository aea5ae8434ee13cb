#include "edu4fd/evaluation.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "edu4fd/log.hpp"
#include "edu4fd/training.hpp"
#include "json.hpp"

namespace edu4fd {

void Confusion::add(int gold, int predicted) {
  if (gold == 1) {
    (predicted == 1 ? tp : fn) += 1;
  } else {
    (predicted == 1 ? fp : tn) += 1;
  }
}

namespace {

double ratio(std::size_t num, std::size_t den, const char* what) {
  if (den == 0) {
    log::warn(std::string("undefined ") + what + " (zero denominator), using 0");
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

Metrics macro_metrics(const Confusion& c) {
  Metrics m;
  if (c.total() == 0) {
    log::warn("metrics over an empty set");
    return m;
  }
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const double p_fake = ratio(c.tp, c.tp + c.fp, "precision for fake");
  const double r_fake = ratio(c.tp, c.tp + c.fn, "recall for fake");
  const double p_real = ratio(c.tn, c.tn + c.fn, "precision for real");
  const double r_real = ratio(c.tn, c.tn + c.fp, "recall for real");
  m.precision = (p_fake + p_real) / 2.0;
  m.recall = (r_fake + r_real) / 2.0;
  m.f1 = (f1_of(p_fake, r_fake) + f1_of(p_real, r_real)) / 2.0;
  return m;
}

int decide(double p_real, double p_fake) { return p_fake > p_real ? 1 : 0; }

Prediction predict(const ModelConfig& config, ModelParams& params, const Vocab& vocab, const Example& example) {
  const ExpandedGraph graph = expand_graph(example.graph, config.add_inverse, config.add_self);
  std::mt19937_64 unused(0);
  Tape tape;
  ForwardResult r = forward(tape, config, params, example, graph, vocab, Mode::kEval, unused);
  Prediction p;
  p.id = example.id;
  p.gold = example.label;
  p.p_real = r.probs.value().values[0];
  p.p_fake = r.probs.value().values[1];
  p.label = decide(p.p_real, p.p_fake);
  p.loss = bce_loss(r.probs, example.label).scalar();
  p.z = r.z.value().values;
  p.edge_attention = std::move(r.edge_attention);
  p.fusion_alpha = std::move(r.fusion_alpha);
  return p;
}

Evaluation evaluate(const ModelConfig& config, ModelParams& params, const Vocab& vocab,
                    const std::vector<Example>& examples) {
  Evaluation ev;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const Prediction p = predict(config, params, vocab, ex);
    ev.confusion.add(p.gold, p.label);
    loss += p.loss;
  }
  ev.metrics = macro_metrics(ev.confusion);
  ev.mean_loss = examples.empty() ? 0.0 : loss / static_cast<double>(examples.size());
  return ev;
}

MetricSummary summarize(const std::vector<Metrics>& trials) {
  MetricSummary s;
  s.trials = trials;
  if (trials.empty()) return s;
  const double n = static_cast<double>(trials.size());
  auto fields = [](Metrics& m) { return std::array<double*, 4>{&m.accuracy, &m.precision, &m.recall, &m.f1}; };
  auto mean = fields(s.mean);
  auto sd = fields(s.stddev);
  for (auto m : trials) {
    auto f = fields(m);
    for (std::size_t k = 0; k < 4; ++k) *mean[k] += *f[k] / n;
  }
  if (trials.size() > 1) {
    for (auto m : trials) {
      auto f = fields(m);
      for (std::size_t k = 0; k < 4; ++k) *sd[k] += (*f[k] - *mean[k]) * (*f[k] - *mean[k]);
    }
    for (std::size_t k = 0; k < 4; ++k) *sd[k] = std::sqrt(*sd[k] / (n - 1.0));
  }
  return s;
}

std::vector<Tokens> example_tokens(const std::vector<Example>& examples) {
  std::vector<Tokens> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    Tokens all;
    for (const auto& edu : ex.edus) all.insert(all.end(), edu.begin(), edu.end());
    out.push_back(std::move(all));
  }
  return out;
}

NamedSummaries run_trials(const TrialData& data, const ModelConfig& config, const TrainConfig& train_config,
                          std::size_t trials, std::size_t min_count) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  const Vocab vocab = build_vocab(example_tokens(data.train), min_count);
  ModelConfig cfg = config;
  cfg.vocab_size = vocab.size();
  std::vector<std::vector<Metrics>> per_test(data.tests.size());
  for (std::size_t i = 0; i < trials; ++i) {
    TrainConfig tc = train_config;
    tc.seed = train_config.seed + i;
    const std::string where = "trial " + std::to_string(i + 1) + ": ";
    TrainResult r;
    try {
      r = train(data.train, data.val, vocab, cfg, tc);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(e.doc_id(), where + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + e.what());
    }
    for (std::size_t t = 0; t < data.tests.size(); ++t) {
      const Evaluation ev = evaluate(cfg, r.params, vocab, data.tests[t].second);
      per_test[t].push_back(ev.metrics);
      log::info("trial " + std::to_string(i + 1) + " " + data.tests[t].first + " f1=" + fmt("%.4f", ev.metrics.f1));
    }
  }
  NamedSummaries out;
  for (std::size_t t = 0; t < data.tests.size(); ++t) out.emplace_back(data.tests[t].first, summarize(per_test[t]));
  return out;
}

std::vector<AblationRow> ablation_suite(const RawSplits& data, const PipelineOptions& pipeline,
                                        const ModelConfig& base, const TrainConfig& train_config,
                                        std::size_t trials, std::size_t min_count) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    const PipelineOptions po = variant_pipeline(pipeline, v);
    TrialData td;
    td.train = prepare_corpus(data.train, po).examples;
    td.val = prepare_corpus(data.val, po).examples;
    for (const auto& [name, corpus] : data.tests) td.tests.emplace_back(name, prepare_corpus(corpus, po).examples);
    log::info("ablation variant " + std::string(variant_name(v)));
    rows.push_back({v, run_trials(td, apply_variant(base, v), train_config, trials, min_count)});
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json metrics_obj(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

nlohmann::ordered_json summaries_obj(const NamedSummaries& results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, s] : results) {
    nlohmann::ordered_json trials = nlohmann::ordered_json::array();
    for (const auto& m : s.trials) trials.push_back(metrics_obj(m));
    j[name] = {{"mean", metrics_obj(s.mean)}, {"std", metrics_obj(s.stddev)}, {"trials", std::move(trials)}};
  }
  return j;
}

}  // namespace

std::string metrics_json(const NamedSummaries& results) { return summaries_obj(results).dump(2); }

std::string ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    j.push_back({{"variant", std::string(variant_name(row.variant))}, {"results", summaries_obj(row.results)}});
  }
  return j.dump(2);
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-14s %-16s %-16s %-16s %-16s\n", "variant", "test set", "accuracy",
                "precision", "recall", "f1");
  os << line;
  auto cell = [](double mean, double sd) { return fmt("%.4f", mean) + " +/- " + fmt("%.4f", sd); };
  for (const auto& row : rows) {
    for (const auto& [name, s] : row.results) {
      std::snprintf(line, sizeof line, "%-12s %-14s %-16s %-16s %-16s %-16s\n",
                    std::string(variant_name(row.variant)).c_str(), name.c_str(),
                    cell(s.mean.accuracy, s.stddev.accuracy).c_str(), cell(s.mean.precision, s.stddev.precision).c_str(),
                    cell(s.mean.recall, s.stddev.recall).c_str(), cell(s.mean.f1, s.stddev.f1).c_str());
      os << line;
    }
  }
  return os.str();
}

void export_embeddings(const ModelConfig& config, ModelParams& params, const Vocab& vocab,
                       const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& ex : examples) {
    const Prediction p = predict(config, params, vocab, ex);
    out << p.id << '\t' << p.gold << '\t' << p.label;
    for (double v : p.z) out << '\t' << fmt("%.17g", v);
    out << '\n';
  }
  if (!out) throw IoError("write error on " + path.string());
}

std::string attention_json(const ModelConfig& config, const Example& example, const Prediction& prediction) {
  const ChannelLayout layout = config.channels();
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& ea : prediction.edge_attention) {
    const bool inverse = layout.add_inverse && ea.channel >= kNumRelations && ea.channel < 2 * kNumRelations;
    for (std::size_t k = 0; k < ea.neighbors.size(); ++k) {
      edges.push_back({{"layer", ea.layer},
                       {"node", ea.node},
                       {"head", inverse ? ea.node : ea.neighbors[k]},
                       {"dep", inverse ? ea.neighbors[k] : ea.node},
                       {"relation", layout.name(ea.channel)},
                       {"alpha", ea.alpha[k]}});
    }
  }
  nlohmann::ordered_json fusion = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < prediction.fusion_alpha.size(); ++t) {
    fusion.push_back({{"index", t}, {"alpha_t", prediction.fusion_alpha[t]}});
  }
  nlohmann::ordered_json j;
  j["id"] = example.id;
  j["gold"] = prediction.gold;
  j["predicted"] = prediction.label;
  j["p_fake"] = prediction.p_fake;
  j["edus"] = nlohmann::ordered_json::array();
  for (const auto& edu : example.edus) j["edus"].push_back(join_tokens(edu));
  j["graph_attention"] = std::move(edges);
  j["fusion_attention"] = std::move(fusion);
  return j.dump(2);
}

void export_attention(const ModelConfig& config, ModelParams& params, const Vocab& vocab, const Example& example,
                      const std::filesystem::path& path) {
  const Prediction p = predict(config, params, vocab, example);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << attention_json(config, example, p) << '\n';
}

}  // namespace edu4fd
