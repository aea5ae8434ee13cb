#include <algorithm>
#include <set>

#include "doctest.h"
#include "edu4fd/corpus.hpp"
#include "edu4fd/log.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace edu4fd;
using edu4fd::testing::TempDir;
using edu4fd::testing::write_file;

namespace {

Corpus numbered(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.text = "x";
    d.label = static_cast<int>(i % 2);
    c.documents.push_back(d);
  }
  return c;
}

std::vector<std::string> ids(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& d : c.documents) out.push_back(d.id);
  return out;
}

Document with_edges(const std::string& id, int label, std::vector<Relation> rels) {
  Document d;
  d.id = id;
  d.label = label;
  d.gold_edus = std::vector<Tokens>(rels.size() + 1, Tokens{"w", "v"});
  std::vector<GoldEdge> edges;
  for (std::size_t i = 0; i < rels.size(); ++i) edges.push_back({0, i + 1, rels[i]});
  d.gold_edges = edges;
  return d;
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

TEST_CASE("tokenizer detaches punctuation and keeps offsets") {
  CHECK(tokenize("We stayed home because it rained.") ==
        Tokens{"We", "stayed", "home", "because", "it", "rained", "."});
  CHECK(tokenize("\"Hello,\" she said (quietly).") ==
        Tokens{"\"", "Hello", ",", "\"", "she", "said", "(", "quietly", ")", "."});
  CHECK(tokenize("   ").empty());
  CHECK(tokenize(". ,") == Tokens{".", ","});
  const auto toks = tokenize_with_offsets("ab, cd");
  REQUIRE(toks.size() == 3);
  CHECK(toks[1].text == ",");
  CHECK(toks[1].begin == 2);
  CHECK(toks[2].begin == 4);
  CHECK(toks[2].end == 6);
}

TEST_CASE("parse_document validates records") {
  const Document d = parse_document(
      R"({"id":"a","text":"t","label":1,"edus":["Hi there","you ."],"graph":[{"head":0,"dep":1,"rel":"Cause"}]})", 1);
  CHECK(d.label == 1);
  CHECK(d.gold_edus->size() == 2);
  CHECK((*d.gold_edges)[0] == GoldEdge{0, 1, Relation::kCause});
  CHECK(d.edu_count() == 2u);

  auto line_error = [](const std::string& json, std::size_t line) {
    try {
      parse_document(json, line);
    } catch (const CorpusError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string unknown =
      line_error(R"({"id":"a","text":"t","label":0,"edus":["a b","c d"],"graph":[{"head":0,"dep":1,"rel":"Foo"}]})", 7);
  CHECK(unknown.find("line 7") != std::string::npos);
  CHECK(unknown.find("Foo") != std::string::npos);
  CHECK_FALSE(line_error(R"({"id":"a","text":"t","label":2})", 1).empty());
  CHECK_FALSE(line_error(R"({"text":"t","label":0})", 1).empty());
  CHECK_FALSE(line_error(R"({"id":"a","text":"t","label":0,"edus":["a",""]})", 1).empty());
  CHECK_FALSE(line_error(R"({"id":"a","text":"t","label":0,"edus":["a","b"],"graph":[{"head":0,"dep":5,"rel":"Cause"}]})", 1).empty());
  CHECK_FALSE(line_error("{not json", 1).empty());
}

TEST_CASE("load_corpus counts short documents and rejects duplicates") {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","text":"x","label":0,"edus":["one two","three four"]})"
             "\n"
             R"({"id":"b","text":"Hi .","label":1,"edus":["Hi ."]})"
             "\n"
             R"({"id":"c","text":"plain text only","label":1})"
             "\n");
  const LoadResult r = load_corpus(dir / "c.jsonl");
  CHECK(r.corpus.size() == 2);
  CHECK(r.dropped_short == 1);

  write_file(dir / "dup.jsonl", R"({"id":"a","text":"x","label":0})"
                                "\n"
                                R"({"id":"a","text":"y","label":1})"
                                "\n");
  CHECK_THROWS_AS(load_corpus(dir / "dup.jsonl"), CorpusError);
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl"), IoError);

  write_file(dir / "three.jsonl", R"({"id":"a","text":"x","label":0})"
                                  "\n"
                                  R"({"id":"b","text":"y","label":1})"
                                  "\n"
                                  R"({"id":"c","text":"z","label":1})"
                                  "\n");
  CHECK(load_corpus(dir / "three.jsonl").corpus.size() == 3);
}

TEST_CASE("corpus save/load round trip") {
  TempDir dir;
  testing::SyntheticSpec spec;
  spec.n_docs = 12;
  const Corpus c = testing::make_synthetic_corpus(spec);
  save_corpus(dir / "rt.jsonl", c);
  const Corpus back = load_corpus(dir / "rt.jsonl").corpus;
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.documents[i].id == c.documents[i].id);
    CHECK(back.documents[i].gold_edus == c.documents[i].gold_edus);
    CHECK(back.documents[i].gold_edges == c.documents[i].gold_edges);
  }
}

TEST_CASE("vocabulary") {
  const std::vector<Tokens> docs = {{"a", "b"}, {"a", "c"}};
  const Vocab v = build_vocab(docs, 1);
  CHECK(v.size() == 5);
  CHECK(v.token(Vocab::kPad) == "<pad>");
  CHECK(v.token(Vocab::kUnk) == "<unk>");
  CHECK(v.lookup("a") == 2);
  CHECK(v.lookup("c") == 4);
  CHECK(v.lookup("A") == 2);
  CHECK(v.lookup("zzz") == Vocab::kUnk);

  const Vocab pruned = build_vocab(docs, 2);
  CHECK(pruned.size() == 3);
  CHECK(pruned.lookup("b") == Vocab::kUnk);
  CHECK(pruned.lookup("c") == Vocab::kUnk);
  CHECK(pruned.lookup("a") == 2);

  CHECK(Vocab::from_tokens(v.tokens()) == v);
  for (const auto& t : v.tokens()) CHECK(v.lookup(t) < static_cast<std::int64_t>(v.size()));
}

TEST_CASE("split sizes follow round-half-up") {
  auto sizes = [](std::size_t n) {
    const Splits s = split_corpus(numbered(n), SplitSpec{});
    return std::array<std::size_t, 3>{s.train.size(), s.val.size(), s.test.size()};
  };
  CHECK(sizes(100) == std::array<std::size_t, 3>{72, 18, 10});
  CHECK(sizes(20) == std::array<std::size_t, 3>{14, 4, 2});
  CHECK(sizes(15) == std::array<std::size_t, 3>{10, 3, 2});  // 1.5 -> 2, 2.6 -> 3
  CHECK_THROWS(split_corpus(numbered(9), SplitSpec{}));
}

TEST_CASE("splits partition the corpus deterministically") {
  const Corpus c = numbered(57);
  SplitSpec spec;
  spec.seed = 42;
  const Splits a = split_corpus(c, spec);
  const Splits b = split_corpus(c, spec);
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.test) == ids(b.test));

  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& id : ids(*part)) all.insert(id);
  CHECK(all.size() == 57);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 57);

  spec.seed = 43;
  CHECK(ids(split_corpus(c, spec).test) != ids(a.test));

  // Relative order inside a split follows the corpus.
  auto index = [](const std::string& id) { return std::stoul(id.substr(1)); };
  const auto tr = ids(a.train);
  CHECK(std::is_sorted(tr.begin(), tr.end(), [&](auto& x, auto& y) { return index(x) < index(y); }));
}

TEST_CASE("corpus statistics") {
  Corpus c;
  for (std::size_t n : {2, 4, 6}) {
    Document d;
    d.id = "d" + std::to_string(n);
    d.label = n == 4 ? 1 : 0;
    d.gold_edus = std::vector<Tokens>(n, Tokens{"x"});
    c.documents.push_back(d);
  }
  const CorpusStats st = corpus_stats(c);
  CHECK(st.avg_edus == 4.0);
  CHECK(st.n_real == 2);
  CHECK(st.n_fake == 1);
  CHECK(st.total == 3);
  CHECK(corpus_stats(Corpus{}).avg_edus == 0.0);

  const std::string table = render_corpus_stats({{"set", st}});
  for (const char* row : {"# Real news", "# Fake news", "# Total news", "avg.# EDUs per news"}) {
    CHECK(table.find(row) != std::string::npos);
  }
}

TEST_CASE("relation statistics") {
  Corpus c;
  c.documents.push_back(with_edges("f1", 1, {Relation::kCause, Relation::kCause}));
  c.documents.push_back(with_edges("f2", 1, {Relation::kContrast}));
  c.documents.push_back(with_edges("r1", 0, {Relation::kElaboration, Relation::kElaboration}));
  const RelationStats st = relation_stats(c);
  CHECK(st.frequency(1, Relation::kCause) == doctest::Approx(2.0 / 3.0));
  CHECK(st.frequency(1, Relation::kContrast) == doctest::Approx(1.0 / 3.0));
  CHECK(st.frequency(0, Relation::kElaboration) == 1.0);
  CHECK(st.frequency(0, Relation::kCause) == 0.0);

  const std::string table = render_relation_stats({{"set", st}});
  CHECK(table.find("0.667") != std::string::npos);
  CHECK(table.find("0.333") != std::string::npos);
  CHECK(table.find("1.000") != std::string::npos);
  for (const auto name : kRelationNames) CHECK(table.find(std::string(name)) != std::string::npos);

  for (int label : {0, 1}) {
    double sum = 0;
    for (std::size_t r = 0; r < kNumRelations; ++r) sum += st.frequency(label, static_cast<Relation>(r));
    CHECK(std::abs(sum - 1.0) < 0.002);
  }
}

TEST_CASE("relation statistics warn for a class without edges") {
  CaptureWarnings capture;
  Corpus c;
  c.documents.push_back(with_edges("r1", 0, {Relation::kJoint}));
  const RelationStats st = relation_stats(c);
  CHECK(st.totals[1] == 0);
  CHECK(st.frequency(1, Relation::kJoint) == 0.0);
  CHECK_FALSE(capture.warnings.empty());
}
