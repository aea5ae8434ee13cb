#include <cstdlib>
#include <set>
#include <sstream>

#include "doctest.h"
#include "edu4fd/cli.hpp"
#include "edu4fd/log.hpp"
#include "json.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace edu4fd;
using namespace edu4fd::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "edu4fd");
  args.push_back("--quiet");
  std::ostringstream out;
  const int code = run_cli(args, out);
  return {code, out.str()};
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

/// Corpus file plus a small run config in `dir`.
void write_run(const TempDir& dir, std::size_t n_docs = 40, std::size_t epochs = 2) {
  SyntheticSpec spec;
  spec.n_docs = n_docs;
  spec.marker = true;
  spec.edus_per_sentence = 2;
  save_corpus(dir / "corpus.jsonl", make_synthetic_corpus(spec));
  spec.seed = 99;
  spec.id_prefix = "extra";
  spec.n_docs = 10;
  save_corpus(dir / "extra.jsonl", make_synthetic_corpus(spec));
  nlohmann::json cfg = {
      {"data", {{"corpus", "corpus.jsonl"}, {"test_sets", {{"extra", "extra.jsonl"}}}}},
      {"model", {{"emb_dim", 8}, {"gru_hidden", 4}, {"filters", 6}, {"n_bases", 2}, {"fusion_hidden", 5}}},
      {"train", {{"epochs", epochs}, {"batch_size", 8}}},
      {"seed", 5},
      {"trials", 1}};
  write_file(dir / "run.json", cfg.dump(2));
}

struct CaptureWarnings {
  std::vector<std::string> warnings;
  CaptureWarnings() {
    log::set_sink([this](log::Level level, const std::string& msg) {
      if (level == log::Level::kWarn) warnings.push_back(msg);
    });
  }
  ~CaptureWarnings() { log::set_sink(nullptr); }
};

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"segment"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("segment") {
  TempDir dir;
  SUBCASE("missing input is an I/O error") {
    CHECK(cli({"segment", (dir / "nope.jsonl").string(), "--out", (dir / "o.jsonl").string()}).code == kExitIo);
  }
  SUBCASE("malformed records are invalid input") {
    write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n");
    CHECK(cli({"segment", (dir / "bad.jsonl").string(), "--out", (dir / "o.jsonl").string()}).code == kExitInvalid);
  }
  SUBCASE("gold mode passes EDUs through") {
    SyntheticSpec spec;
    spec.n_docs = 6;
    const Corpus c = make_synthetic_corpus(spec);
    save_corpus(dir / "in.jsonl", c);
    const Run r = cli({"segment", (dir / "in.jsonl").string(), "--out", (dir / "out.jsonl").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("documents\t6") != std::string::npos);
    CHECK(r.out.find("dropped_lt2_edus\t0") != std::string::npos);
    const auto in = read_jsonl(dir / "in.jsonl"), out = read_jsonl(dir / "out.jsonl");
    REQUIRE(in.size() == out.size());
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(in[i].at("edus") == out[i].at("edus"));
  }
  SUBCASE("rule mode is deterministic and counts drops") {
    write_file(dir / "t.jsonl",
               "{\"id\":\"a\",\"text\":\"We stayed home because it rained. Prices rose, but sales fell.\",\"label\":0}\n"
               "{\"id\":\"b\",\"text\":\"Short one here.\",\"label\":1}\n");
    const Run r1 = cli({"segment", (dir / "t.jsonl").string(), "--out", (dir / "a.jsonl").string(), "--mode", "rule"});
    const Run r2 = cli({"segment", (dir / "t.jsonl").string(), "--out", (dir / "b.jsonl").string(), "--mode", "rule"});
    REQUIRE(r1.code == kExitOk);
    CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
    CHECK(r1.out.find("dropped_lt2_edus\t1") != std::string::npos);
    const auto docs = read_jsonl(dir / "a.jsonl");
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].at("edus").size() == 4);
    CHECK(cli({"segment", (dir / "t.jsonl").string(), "--out", (dir / "c.jsonl").string(), "--mode", "bogus"}).code ==
          kExitInvalid);
  }
}

TEST_CASE("graph") {
  TempDir dir;
  write_file(dir / "in.jsonl",
             "{\"id\":\"three\",\"text\":\"\",\"label\":0,\"edus\":[\"a b\",\"because c d\",\"e f\"]}\n"
             "{\"id\":\"two\",\"text\":\"\",\"label\":1,\"edus\":[\"a b\",\"but c d\"]}\n");
  SUBCASE("complete graph on three EDUs has six edges") {
    const Run r = cli({"graph", (dir / "in.jsonl").string(), "--out", (dir / "o.jsonl").string(), "--mode", "complete"});
    REQUIRE(r.code == kExitOk);
    const auto docs = read_jsonl(dir / "o.jsonl");
    CHECK(docs[0].at("graph").size() == 6);
    CHECK(docs[1].at("graph").size() == 2);
    for (const auto& e : docs[0].at("graph")) CHECK(e.at("rel") == "Joint");
  }
  SUBCASE("heuristic graph on two EDUs has one edge") {
    const Run r = cli({"graph", (dir / "in.jsonl").string(), "--out", (dir / "o.jsonl").string()});
    REQUIRE(r.code == kExitOk);
    const auto docs = read_jsonl(dir / "o.jsonl");
    REQUIRE(docs[1].at("graph").size() == 1);
    CHECK(docs[1].at("graph")[0].at("head") == 0);
    CHECK(docs[1].at("graph")[0].at("dep") == 1);
    CHECK(docs[1].at("graph")[0].at("rel") == "Contrast");
    CHECK(r.out.find("Contrast\t1") != std::string::npos);
    CHECK(r.out.find("SELF\t5") != std::string::npos);
  }
  SUBCASE("provided mode round-trips gold edges") {
    SyntheticSpec spec;
    spec.n_docs = 8;
    save_corpus(dir / "gold.jsonl", make_synthetic_corpus(spec));
    REQUIRE(cli({"graph", (dir / "gold.jsonl").string(), "--out", (dir / "o.jsonl").string(), "--mode", "provided"})
                .code == kExitOk);
    const auto in = read_jsonl(dir / "gold.jsonl"), out = read_jsonl(dir / "o.jsonl");
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(in[i].at("graph") == out[i].at("graph"));
  }
  SUBCASE("invalid gold graphs exit with 3") {
    write_file(dir / "selfedge.jsonl",
               "{\"id\":\"c\",\"text\":\"\",\"label\":0,\"edus\":[\"a b\",\"c d\"],"
               "\"graph\":[{\"head\":0,\"dep\":1,\"rel\":\"Cause\"},{\"head\":1,\"dep\":1,\"rel\":\"Cause\"}]}\n");
    CHECK(cli({"graph", (dir / "selfedge.jsonl").string(), "--out", (dir / "o.jsonl").string(), "--mode", "provided"})
              .code == kExitInvalid);
    CHECK_FALSE(fs::exists(dir / "o.jsonl"));
  }
  SUBCASE("documents without EDUs are reported") {
    write_file(dir / "raw.jsonl", "{\"id\":\"r\",\"text\":\"plain words\",\"label\":0}\n");
    CHECK(cli({"graph", (dir / "raw.jsonl").string(), "--out", (dir / "o.jsonl").string()}).code == kExitInvalid);
  }
}

TEST_CASE("stats") {
  TempDir dir;
  SyntheticSpec spec;
  spec.n_docs = 10;
  spec.min_edus = spec.max_edus = 3;
  save_corpus(dir / "c.jsonl", make_synthetic_corpus(spec));
  const Run r = cli({"stats", (dir / "c.jsonl").string(), "--out", dir.path().string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("3.00") != std::string::npos);
  for (const auto name : kRelationNames) CHECK(r.out.find(std::string(name)) != std::string::npos);
  const auto j = nlohmann::json::parse(read_file(dir / "stats.json"));
  CHECK_FALSE(j.empty());

  write_file(dir / "nograph.jsonl", "{\"id\":\"a\",\"text\":\"\",\"label\":0,\"edus\":[\"a b\",\"c d\"]}\n");
  CaptureWarnings capture;
  const Run empty = cli({"stats", (dir / "nograph.jsonl").string()});
  CHECK(empty.code == kExitOk);
  CHECK(empty.out.find("0.000") != std::string::npos);
  CHECK_FALSE(capture.warnings.empty());

  CHECK(cli({"stats", (dir / "missing.jsonl").string()}).code == kExitIo);
}

TEST_CASE("train is deterministic end to end") {
  TempDir dir;
  write_run(dir);
  const Run a = cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "a").string()});
  const Run b = cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "b").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  for (const char* f : {"history.json", "checkpoint.bin", "metrics.json", "resolved_config.json"}) {
    INFO(f);
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  const auto metrics = nlohmann::json::parse(read_file(dir / "a" / "metrics.json"));
  CHECK(metrics.contains("test"));
  CHECK(metrics.contains("extra"));
  for (const char* key : {"accuracy", "precision", "recall", "f1"}) CHECK(metrics.at("test").at("mean").contains(key));
  const auto resolved = nlohmann::json::parse(read_file(dir / "a" / "resolved_config.json"));
  CHECK(resolved.at("seed") == 5);
  CHECK(resolved.at("train").at("lr") == 1e-3);
  CHECK(resolved.at("model").at("dropout") == 0.2);

  SUBCASE("seed precedence") {
    const Run flag = cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "c").string(), "--seed", "6"});
    REQUIRE(flag.code == kExitOk);
    CHECK(nlohmann::json::parse(read_file(dir / "c" / "resolved_config.json")).at("seed") == 6);
    CHECK(read_file(dir / "c" / "history.json") != read_file(dir / "a" / "history.json"));

    ::setenv("EDU4FD_SEED", "7", 1);
    const Run env = cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "d").string()});
    const Run both =
        cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "e").string(), "--seed", "6"});
    ::unsetenv("EDU4FD_SEED");
    REQUIRE(env.code == kExitOk);
    CHECK(nlohmann::json::parse(read_file(dir / "d" / "resolved_config.json")).at("seed") == 7);
    CHECK(nlohmann::json::parse(read_file(dir / "e" / "resolved_config.json")).at("seed") == 6);
    CHECK(read_file(dir / "e" / "history.json") == read_file(dir / "c" / "history.json"));
  }

  SUBCASE("eval") {
    const fs::path ck = dir / "a" / "checkpoint.bin";
    const Run e1 = cli({"eval", ck.string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev").string(),
                        "--export-embeddings", (dir / "ev" / "emb.tsv").string(), "--export-attention", "extra3"});
    REQUIRE(e1.code == kExitOk);
    const auto m = nlohmann::json::parse(read_file(dir / "ev" / "metrics.json"));
    std::set<std::string> keys;
    for (auto& [k, v] : m.at("test").at("mean").items()) keys.insert(k);
    CHECK(keys == std::set<std::string>{"accuracy", "precision", "recall", "f1"});
    // Trained metrics on the extra set come from the same checkpoint.
    const auto trained = nlohmann::json::parse(read_file(dir / "a" / "metrics.json"));
    CHECK(m.at("test").at("mean") == trained.at("extra").at("mean"));

    std::istringstream tsv(read_file(dir / "ev" / "emb.tsv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(tsv, line)) ++rows;
    CHECK(rows == 10);

    const auto att = nlohmann::json::parse(read_file(dir / "ev" / "attention_extra3.json"));
    double sum = 0.0;
    for (const auto& f : att.at("fusion_attention")) sum += f.at("alpha_t").get<double>();
    CHECK(std::abs(sum - 1.0) < 1e-9);

    const Run e2 = cli({"eval", ck.string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev2").string(),
                        "--config", (dir / "run.json").string()});
    REQUIRE(e2.code == kExitOk);
    CHECK(read_file(dir / "ev" / "metrics.json") == read_file(dir / "ev2" / "metrics.json"));

    nlohmann::json other = nlohmann::json::parse(read_file(dir / "run.json"));
    other["model"]["filters"] = 7;
    write_file(dir / "other.json", other.dump());
    CHECK(cli({"eval", ck.string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev3").string(), "--config",
               (dir / "other.json").string()})
              .code == kExitInvalid);
    write_file(dir / "alien.jsonl", "{\"id\":\"z\",\"text\":\"\",\"label\":0,\"edus\":[\"qq rr\",\"ss tt\"]}\n");
    CHECK(cli({"eval", ck.string(), (dir / "alien.jsonl").string(), "--out", (dir / "ev4").string()}).code ==
          kExitInvalid);
    write_file(dir / "junk.bin", "not a checkpoint");
    CHECK(cli({"eval", (dir / "junk.bin").string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev5").string()})
              .code == kExitInvalid);
    CHECK(cli({"eval", ck.string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev6").string(), "--trials", "2"})
              .code == kExitInvalid);
    CHECK(cli({"eval", ck.string(), (dir / "extra.jsonl").string(), "--out", (dir / "ev7").string(),
               "--export-attention", "nosuchdoc"})
              .code == kExitInvalid);
  }
}

TEST_CASE("train config errors") {
  TempDir dir;
  write_run(dir);
  nlohmann::json cfg = nlohmann::json::parse(read_file(dir / "run.json"));
  cfg["model"]["colour"] = "blue";
  write_file(dir / "unknown.json", cfg.dump());
  CHECK(cli({"train", "--config", (dir / "unknown.json").string(), "--out", (dir / "x").string()}).code ==
        kExitInvalid);
  cfg = nlohmann::json::parse(read_file(dir / "run.json"));
  cfg["model"]["n_bases"] = 100;
  write_file(dir / "bases.json", cfg.dump());
  CHECK(cli({"train", "--config", (dir / "bases.json").string(), "--out", (dir / "x").string()}).code == kExitInvalid);
  write_file(dir / "broken.json", "{");
  CHECK(cli({"train", "--config", (dir / "broken.json").string(), "--out", (dir / "x").string()}).code ==
        kExitInvalid);
  CHECK(cli({"train", "--config", (dir / "none.json").string(), "--out", (dir / "x").string()}).code == kExitIo);
  cfg = nlohmann::json::parse(read_file(dir / "run.json"));
  cfg["data"]["corpus"] = "missing.jsonl";
  write_file(dir / "nocorpus.json", cfg.dump());
  CHECK(cli({"train", "--config", (dir / "nocorpus.json").string(), "--out", (dir / "x").string()}).code == kExitIo);
}

TEST_CASE("run config defaults") {
  const RunConfig c = run_config_from_json("{}");
  CHECK(c.train.lr == 1e-3);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.epochs == 10);
  CHECK(c.model.dropout == 0.2);
  CHECK(c.trials == 5);
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));
  const RunConfig rel = run_config_from_json(R"({"data":{"corpus":"x.jsonl"}})", "/tmp/base");
  CHECK(rel.data.corpus == fs::path("/tmp/base/x.jsonl"));
  CHECK_THROWS_AS(run_config_from_json(R"({"bogus":1})"), std::invalid_argument);
}

TEST_CASE("ablate writes a six-row table") {
  TempDir dir;
  write_run(dir, 32, 1);
  const Run r = cli({"ablate", "--config", (dir / "run.json").string(), "--out", (dir / "ab").string()});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(read_file(dir / "ab" / "ablation.json"));
  REQUIRE(j.size() == 6);
  std::vector<std::string> names;
  for (const auto& row : j) names.push_back(row.at("variant"));
  CHECK(names == std::vector<std::string>{"full", "no-edu", "no-rgat", "no-c", "no-g", "no-c-no-g"});
  CHECK(read_file(dir / "ab" / "ablation.txt") == r.out);
  const Run again = cli({"ablate", "--config", (dir / "run.json").string(), "--out", (dir / "ab2").string()});
  CHECK(read_file(dir / "ab2" / "ablation.txt") == r.out);
}
