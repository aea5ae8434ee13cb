#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "edu4fd/evaluation.hpp"
#include "edu4fd/log.hpp"
#include "edu4fd/training.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace edu4fd;
using namespace edu4fd::testing;

namespace {

Confusion from_pairs(const std::vector<std::pair<int, int>>& gold_pred) {
  Confusion c;
  for (auto [g, p] : gold_pred) c.add(g, p);
  return c;
}

ModelConfig tiny_config(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.emb_dim = 6;
  c.gru_hidden = 3;
  c.filters = 4;
  c.n_bases = 2;
  c.fusion_hidden = 5;
  return c;
}

std::vector<Example> synthetic_examples(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_docs = n;
  spec.seed = seed;
  spec.marker = true;
  return prepare_corpus(make_synthetic_corpus(spec), PipelineOptions{}).examples;
}

}  // namespace

TEST_CASE("confusion bookkeeping") {
  Confusion c;
  c.add(1, 1);
  c.add(1, 0);
  c.add(0, 1);
  c.add(0, 0);
  c.add(0, 0);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 2);
  CHECK(c.total() == 5);
}

TEST_CASE("metric fixtures") {
  SUBCASE("perfect predictions") {
    const Metrics m = macro_metrics(from_pairs({{1, 1}, {0, 0}, {1, 1}, {0, 0}}));
    CHECK(m == Metrics{1.0, 1.0, 1.0, 1.0});
  }
  SUBCASE("one of each cell") {
    const Metrics m = macro_metrics(Confusion{1, 1, 1, 1});
    CHECK(m == Metrics{0.5, 0.5, 0.5, 0.5});
  }
  SUBCASE("everything predicted fake on a balanced set of ten") {
    const Metrics m = macro_metrics(Confusion{5, 5, 0, 0});
    CHECK(m.accuracy == 0.5);
    // fake: P = 5/10, R = 1, F1 = 2/3; real: P = R = F1 = 0 by convention.
    CHECK(m.precision == 0.25);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == (0.0 + 2.0 / 3.0) / 2.0);
    CHECK(std::abs(m.f1 - 0.3333) < 5e-5);
  }
}

TEST_CASE("zero denominators warn") {
  std::vector<std::string> warnings;
  log::set_sink([&](log::Level level, const std::string& msg) {
    if (level == log::Level::kWarn) warnings.push_back(msg);
  });
  macro_metrics(Confusion{5, 5, 0, 0});
  log::set_sink(nullptr);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("macro metrics are symmetric under a class swap") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Confusion c{rng() % 9, rng() % 9, rng() % 9, rng() % 9 + 1};
    const Confusion swapped{c.tn, c.fn, c.fp, c.tp};
    const Metrics a = macro_metrics(c), b = macro_metrics(swapped);
    CHECK(std::abs(a.accuracy - b.accuracy) < 1e-15);
    CHECK(std::abs(a.precision - b.precision) < 1e-15);
    CHECK(std::abs(a.recall - b.recall) < 1e-15);
    CHECK(std::abs(a.f1 - b.f1) < 1e-15);
    for (double v : {a.accuracy, a.precision, a.recall, a.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("decision rule") {
  CHECK(decide(0.9, 0.1) == 0);
  CHECK(decide(0.1, 0.9) == 1);
  CHECK(decide(0.5, 0.5) == 0);
}

TEST_CASE("trial summaries") {
  Metrics a{0.8, 0.8, 0.8, 0.8}, b{0.9, 0.9, 0.9, 0.9};
  const MetricSummary s = summarize({a, b});
  CHECK(s.mean.f1 == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(s.stddev.f1 == doctest::Approx(std::sqrt(0.005)).epsilon(1e-12));
  CHECK(s.trials.size() == 2);
  const MetricSummary one = summarize({a});
  CHECK(one.mean == a);
  CHECK(one.stddev == Metrics{});

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Metrics> many;
  for (int i = 0; i < 7; ++i) many.push_back({u(rng), u(rng), u(rng), u(rng)});
  const MetricSummary m = summarize(many);
  double lo = 1, hi = 0;
  for (const auto& x : many) {
    lo = std::min(lo, x.f1);
    hi = std::max(hi, x.f1);
  }
  CHECK(m.mean.f1 >= lo);
  CHECK(m.mean.f1 <= hi);
}

TEST_CASE("prediction and evaluation agree") {
  const auto examples = synthetic_examples(20, 3);
  const Vocab vocab = build_vocab(example_tokens(examples), 1);
  const ModelConfig c = tiny_config(vocab.size());
  std::mt19937_64 rng(1);
  ModelParams p = init_params(c, rng);
  fill_uniform(p, rng, -0.3, 0.3);
  const Evaluation ev = evaluate(c, p, vocab, examples);
  CHECK(ev.confusion.total() == examples.size());
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const Prediction pr = predict(c, p, vocab, ex);
    CHECK(pr.label == decide(pr.p_real, pr.p_fake));
    CHECK(pr.z.size() == c.fusion_hidden);
    CHECK(pr.fusion_alpha.size() == ex.edus.size());
    CHECK(std::abs(std::accumulate(pr.fusion_alpha.begin(), pr.fusion_alpha.end(), 0.0) - 1.0) < 1e-12);
    for (const auto& ea : pr.edge_attention)
      CHECK(std::abs(std::accumulate(ea.alpha.begin(), ea.alpha.end(), 0.0) - 1.0) < 1e-12);
    correct += pr.label == ex.label;
    loss += pr.loss;
  }
  CHECK(ev.metrics.accuracy == static_cast<double>(correct) / static_cast<double>(examples.size()));
  CHECK(std::abs(ev.mean_loss - loss / static_cast<double>(examples.size())) < 1e-12);
}

TEST_CASE("run_trials") {
  const auto all = synthetic_examples(30, 5);
  TrialData data;
  data.train.assign(all.begin(), all.begin() + 20);
  data.val.assign(all.begin() + 20, all.begin() + 25);
  data.tests = {{"test", std::vector<Example>(all.begin() + 25, all.end())}, {"extra", data.val}};
  ModelConfig c = tiny_config(0);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 10;

  const NamedSummaries one = run_trials(data, c, tc, 1);
  REQUIRE(one.size() == 2);
  CHECK(one[0].first == "test");
  CHECK(one[1].first == "extra");
  // k = 1 is a single train + evaluate.
  const Vocab vocab = build_vocab(example_tokens(data.train), 1);
  ModelConfig cfg = c;
  cfg.vocab_size = vocab.size();
  TrainResult r = train(data.train, data.val, vocab, cfg, tc);
  CHECK(one[0].second.mean == evaluate(cfg, r.params, vocab, data.tests[0].second).metrics);

  const NamedSummaries three = run_trials(data, c, tc, 3);
  CHECK(three[0].second.trials.size() == 3);
  CHECK(three[0].second.trials[0] == one[0].second.trials[0]);
  CHECK_THROWS_AS(run_trials(data, c, tc, 0), std::invalid_argument);

  ModelConfig broken = c;
  broken.dropout = 1.0;
  try {
    run_trials(data, broken, tc, 2);
    FAIL("expected failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("trial 1") != std::string::npos);
  }

  const auto j = nlohmann::json::parse(metrics_json(three));
  for (const char* key : {"accuracy", "precision", "recall", "f1"}) {
    CHECK(j.at("test").at("mean").contains(key));
    CHECK(j.at("test").at("std").contains(key));
  }
  CHECK(j.at("test").at("trials").size() == 3);
}

TEST_CASE("ablation suite produces six rows with a stable table") {
  SyntheticSpec spec;
  spec.n_docs = 24;
  spec.marker = true;
  spec.edus_per_sentence = 2;
  const Corpus corpus = make_synthetic_corpus(spec);
  RawSplits raw;
  raw.train.documents.assign(corpus.documents.begin(), corpus.documents.begin() + 16);
  raw.val.documents.assign(corpus.documents.begin() + 16, corpus.documents.begin() + 20);
  Corpus test;
  test.documents.assign(corpus.documents.begin() + 20, corpus.documents.end());
  raw.tests = {{"test", test}};
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  const auto rows = ablation_suite(raw, PipelineOptions{}, tiny_config(0), tc, 1);
  REQUIRE(rows.size() == 6);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(std::string(variant_name(r.variant)));
  CHECK(names == std::vector<std::string>{"full", "no-edu", "no-rgat", "no-c", "no-g", "no-c-no-g"});

  const std::string table = render_ablation_table(rows);
  CHECK(table == render_ablation_table(rows));
  std::istringstream lines(table);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 7);
  CHECK(table.find("+/-") != std::string::npos);
  const auto j = nlohmann::json::parse(ablation_json(rows));
  CHECK(j.size() == 6);
  CHECK(j[2].at("variant") == "no-rgat");
  CHECK(j[0].at("results").at("test").at("mean").contains("f1"));
}

TEST_CASE("embedding export") {
  const auto examples = synthetic_examples(12, 7);
  const Vocab vocab = build_vocab(example_tokens(examples), 1);
  const ModelConfig c = tiny_config(vocab.size());
  std::mt19937_64 rng(2);
  ModelParams p = init_params(c, rng);
  fill_uniform(p, rng, -0.3, 0.3);
  TempDir dir;
  export_embeddings(c, p, vocab, examples, dir / "emb.tsv");
  export_embeddings(c, p, vocab, examples, dir / "emb2.tsv");
  const std::string text = read_file(dir / "emb.tsv");
  CHECK(text == read_file(dir / "emb2.tsv"));

  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cols.push_back(cell);
    REQUIRE(row < examples.size());
    const Prediction pr = predict(c, p, vocab, examples[row]);
    REQUIRE(cols.size() == 3 + c.fusion_hidden);
    CHECK(cols[0] == examples[row].id);
    CHECK(std::stoi(cols[1]) == examples[row].label);
    CHECK(std::stoi(cols[2]) == pr.label);
    for (std::size_t k = 0; k < c.fusion_hidden; ++k) CHECK(std::stod(cols[3 + k]) == pr.z[k]);
    ++row;
  }
  CHECK(row == examples.size());
  CHECK_THROWS_AS(export_embeddings(c, p, vocab, examples, dir / "no" / "such" / "dir.tsv"), IoError);
}

TEST_CASE("attention export") {
  Example ex;
  ex.id = "doc7";
  ex.label = 1;
  ex.edus = {{"the", "council"}, {"voted", "on"}, {"new", "budget"}};
  ex.graph = {3, {{0, 1, Relation::kCause}, {0, 2, Relation::kContrast}}};
  const Vocab vocab = build_vocab({{"the", "council", "voted", "on", "new", "budget"}}, 1);
  ModelConfig c = tiny_config(vocab.size());
  c.add_self = false;
  std::mt19937_64 rng(3);
  ModelParams p = init_params(c, rng);
  fill_uniform(p, rng, -0.5, 0.5);
  TempDir dir;
  export_attention(c, p, vocab, ex, dir / "att.json");
  const auto j = nlohmann::json::parse(read_file(dir / "att.json"));
  const Prediction pr = predict(c, p, vocab, ex);
  CHECK(j.at("id") == "doc7");
  CHECK(j.at("gold") == 1);
  CHECK(j.at("predicted") == pr.label);
  CHECK(j.at("p_fake").get<double>() == pr.p_fake);
  CHECK(j.at("edus").size() == 3);

  // Every node has exactly one neighbour in each of its channels here.
  const auto& edges = j.at("graph_attention");
  CHECK(edges.size() == 4);
  std::set<std::tuple<std::size_t, std::size_t, std::string>> seen;
  for (const auto& e : edges) {
    CHECK(e.at("alpha").get<double>() == 1.0);
    seen.insert({e.at("head").get<std::size_t>(), e.at("dep").get<std::size_t>(), e.at("relation").get<std::string>()});
  }
  CHECK(seen.count({0, 1, "Cause"}) == 1);
  CHECK(seen.count({0, 2, "Contrast"}) == 1);
  CHECK(seen.size() == 4);

  const auto& fusion = j.at("fusion_attention");
  REQUIRE(fusion.size() == 3);
  double sum = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(fusion[t].at("index") == t);
    CHECK(fusion[t].at("alpha_t").get<double>() == pr.fusion_alpha[t]);
    sum += fusion[t].at("alpha_t").get<double>();
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
}
