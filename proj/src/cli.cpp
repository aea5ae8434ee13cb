#include "edu4fd/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "edu4fd/log.hpp"
#include "json.hpp"

namespace edu4fd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw std::invalid_argument("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("unknown config key '" + (section.empty() ? "" : section + ".") + it.key() + "'");
    }
  }
}

std::set<std::string> keys_of(const std::string& json_text) {
  std::set<std::string> out;
  const nlohmann::json j = nlohmann::json::parse(json_text);
  for (auto& [k, v] : j.items()) out.insert(k);
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void echo(const std::string& command, const std::string& json_text) {
  log::info("resolved " + command + " configuration: " + json_text);
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("EDU4FD_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string_view(s).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("EDU4FD_SEED is not an unsigned integer: '") + s + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  data.split.seed = s;
  train.seed = s;
}

void RunConfig::validate() const {
  if (data.corpus.empty()) throw std::invalid_argument("config field 'data.corpus' is required");
  if (data.pipeline.max_edu_len == 0) throw std::invalid_argument("config field 'data.max_edu_len' must be >= 1");
  if (data.min_count == 0) throw std::invalid_argument("config field 'data.min_count' must be >= 1");
  if (!(data.split.test_fraction > 0.0 && data.split.test_fraction < 1.0)) {
    throw std::invalid_argument("config field 'data.split.test_fraction' must lie in (0, 1)");
  }
  if (!(data.split.val_fraction_of_rest > 0.0 && data.split.val_fraction_of_rest < 1.0)) {
    throw std::invalid_argument("config field 'data.split.val_fraction_of_rest' must lie in (0, 1)");
  }
  if (data.pipeline.graph_mode == GraphMode::kProvided && data.pipeline.segment_mode != SegmentMode::kGold) {
    throw std::invalid_argument("config field 'data.graph_mode': provided graphs require gold segmentation");
  }
  if (trials == 0) throw std::invalid_argument("config field 'trials' must be >= 1");
  ModelConfig m = model;
  if (m.vocab_size == 0) m.vocab_size = 2;
  m.validate();
  train.validate();
}

RunConfig run_config_from_json(std::string_view json_text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"data", "model", "train", "seed", "trials"}, "");
  RunConfig c;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"corpus", "test_sets", "segment_mode", "graph_mode", "max_edu_len", "min_count", "split"},
                   "data");
    if (d.contains("corpus")) c.data.corpus = resolve(base_dir, d.at("corpus").get<std::string>());
    if (d.contains("test_sets")) {
      for (auto& [name, p] : d.at("test_sets").items()) {
        c.data.test_sets.emplace_back(name, resolve(base_dir, p.get<std::string>()));
      }
    }
    if (d.contains("segment_mode")) c.data.pipeline.segment_mode = parse_segment_mode(d.at("segment_mode").get<std::string>());
    if (d.contains("graph_mode")) c.data.pipeline.graph_mode = parse_graph_mode(d.at("graph_mode").get<std::string>());
    if (d.contains("max_edu_len")) c.data.pipeline.max_edu_len = d.at("max_edu_len").get<std::size_t>();
    if (d.contains("min_count")) c.data.min_count = d.at("min_count").get<std::size_t>();
    if (d.contains("split")) {
      const auto& s = d.at("split");
      reject_unknown(s, {"test_fraction", "val_fraction_of_rest"}, "data.split");
      if (s.contains("test_fraction")) c.data.split.test_fraction = s.at("test_fraction").get<double>();
      if (s.contains("val_fraction_of_rest")) c.data.split.val_fraction_of_rest = s.at("val_fraction_of_rest").get<double>();
    }
  }
  if (j.contains("model")) {
    reject_unknown(j.at("model"), keys_of(model_config_to_json(ModelConfig{})), "model");
    c.model = model_config_from_json(j.at("model").dump());
  }
  if (j.contains("train")) {
    reject_unknown(j.at("train"), keys_of(train_config_to_json(TrainConfig{})), "train");
    c.train = train_config_from_json(j.at("train").dump());
  }
  if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
  c.set_seed(j.contains("seed") ? j.at("seed").get<std::uint64_t>() : c.train.seed);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return run_config_from_json(ss.str(), path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  ojson j;
  ojson data;
  data["corpus"] = c.data.corpus.string();
  data["test_sets"] = ojson::object();
  for (const auto& [name, p] : c.data.test_sets) data["test_sets"][name] = p.string();
  data["segment_mode"] = std::string(segment_mode_name(c.data.pipeline.segment_mode));
  data["graph_mode"] = std::string(graph_mode_name(c.data.pipeline.graph_mode));
  data["max_edu_len"] = c.data.pipeline.max_edu_len;
  data["min_count"] = c.data.min_count;
  data["split"] = {{"test_fraction", c.data.split.test_fraction},
                   {"val_fraction_of_rest", c.data.split.val_fraction_of_rest}};
  j["data"] = std::move(data);
  j["model"] = ojson::parse(model_config_to_json(c.model));
  j["train"] = ojson::parse(train_config_to_json(c.train));
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

RunConfig resolve_run_config(const fs::path& config_path, const Common& common) {
  RunConfig c = load_run_config(config_path);
  if (auto s = env_seed()) c.set_seed(*s);
  if (common.seed) c.set_seed(*common.seed);
  c.validate();
  return c;
}

Corpus load_or_throw(const fs::path& path) {
  LoadResult r = load_corpus(path);
  if (r.dropped_short > 0) {
    log::info(path.string() + ": dropped " + std::to_string(r.dropped_short) + " documents with fewer than 2 EDUs");
  }
  return std::move(r.corpus);
}

struct PreparedRun {
  Splits raw;
  std::vector<std::pair<std::string, Corpus>> extra_tests;
  std::size_t dropped = 0;
};

PreparedRun prepare_run(const RunConfig& c) {
  PreparedRun run;
  Corpus all = load_or_throw(c.data.corpus);
  Corpus kept;
  for (auto& doc : all.documents) {
    if (prepare_example(doc, c.data.pipeline)) {
      kept.documents.push_back(std::move(doc));
    } else {
      ++run.dropped;
    }
  }
  if (run.dropped > 0) {
    log::info("dropped " + std::to_string(run.dropped) + " documents with fewer than 2 EDUs after segmentation");
  }
  run.raw = split_corpus(kept, c.data.split);
  for (const auto& [name, path] : c.data.test_sets) run.extra_tests.emplace_back(name, load_or_throw(path));
  return run;
}

std::vector<Example> prepared(const Corpus& corpus, const PipelineOptions& pipeline) {
  return prepare_corpus(corpus, pipeline).examples;
}

int cmd_segment(const fs::path& in, const fs::path& out_path, SegmentMode mode, std::size_t max_edu_len,
                std::ostream& out) {
  ojson echo_json = {{"command", "segment"},
                     {"in", in.string()},
                     {"out", out_path.string()},
                     {"mode", std::string(segment_mode_name(mode))},
                     {"max_edu_len", max_edu_len}};
  echo("segment", echo_json.dump());
  if (max_edu_len == 0) throw std::invalid_argument("--max-edu-len must be >= 1");
  LoadResult loaded = load_corpus(in);
  Corpus result;
  std::size_t dropped = loaded.dropped_short;
  for (auto& doc : loaded.corpus.documents) {
    EDUSeq seq = segment_edus(doc, mode, max_edu_len);
    const bool keep_root = mode == SegmentMode::kGold && doc.root.has_value();
    if (seq.edus.size() - (keep_root ? 1 : 0) < kMinEdus) {
      ++dropped;
      continue;
    }
    if (mode != SegmentMode::kGold) {
      if (doc.gold_edges) log::warn("document '" + doc.id + "': gold graph discarded after re-segmentation");
      doc.gold_edges.reset();
      doc.root.reset();
    }
    doc.gold_edus = std::move(seq.edus);
    result.documents.push_back(std::move(doc));
  }
  save_corpus(out_path, result);
  out << "documents\t" << result.size() << "\n";
  out << "dropped_lt2_edus\t" << dropped << "\n";
  return kExitOk;
}

int cmd_graph(const fs::path& in, const fs::path& out_path, GraphMode mode, bool inverse, bool self,
              std::ostream& out) {
  ojson echo_json = {{"command", "graph"},         {"in", in.string()}, {"out", out_path.string()},
                     {"mode", std::string(graph_mode_name(mode))}, {"inverse", inverse},
                     {"self", self}};
  echo("graph", echo_json.dump());
  LoadResult loaded = load_corpus(in);
  std::vector<std::string> problems;
  const ChannelLayout layout{inverse, self};
  std::vector<std::size_t> channel_counts(layout.count(), 0);
  Corpus result;
  for (auto& doc : loaded.corpus.documents) {
    if (!doc.gold_edus) {
      problems.push_back("document '" + doc.id + "': no edus (run segment first)");
      continue;
    }
    const std::size_t n = doc.gold_edus->size();
    EDUSeq seq = segment_edus(doc, SegmentMode::kGold, std::numeric_limits<std::size_t>::max());
    DiscourseGraph g;
    if (mode == GraphMode::kProvided) {
      DiscourseGraph gold{n, doc.gold_edges.value_or(std::vector<GoldEdge>{})};
      ValidationReport report = validate_graph(gold, n);
      if (!report.ok()) {
        for (const auto& e : report.errors) problems.push_back("document '" + doc.id + "': " + e);
        continue;
      }
      for (const auto& w : report.warnings) log::warn("document '" + doc.id + "': " + w);
      doc.gold_edges = report.cleaned.edges;
      g = doc.root ? remove_root(report.cleaned, *doc.root) : report.cleaned;
    } else {
      if (doc.root) {
        drop_edu(seq, *doc.root);
        doc.root.reset();
      }
      g = build_graph(doc, seq, mode);
      doc.gold_edus = seq.edus;
      doc.gold_edges = g.edges;
    }
    const ExpandedGraph eg(g, layout);
    for (std::size_t ch : eg.channels()) channel_counts[ch] += eg.channel_edges(ch).size();
    result.documents.push_back(std::move(doc));
  }
  if (!problems.empty()) {
    for (const auto& p : problems) log::error(p);
    throw GraphError(problems);
  }
  save_corpus(out_path, result);
  out << "documents\t" << result.size() << "\n";
  for (std::size_t ch = 0; ch < channel_counts.size(); ++ch) {
    out << layout.name(ch) << "\t" << channel_counts[ch] << "\n";
  }
  return kExitOk;
}

int cmd_stats(const fs::path& in, const std::optional<fs::path>& out_dir, std::ostream& out) {
  ojson echo_json = {{"command", "stats"}, {"in", in.string()}, {"out", out_dir ? out_dir->string() : ""}};
  echo("stats", echo_json.dump());
  const Corpus corpus = load_or_throw(in);
  const std::string name = in.stem().string();
  const NamedCorpusStats cs{{name, corpus_stats(corpus)}};
  const NamedRelationStats rs{{name, relation_stats(corpus)}};
  out << render_corpus_stats(cs) << "\n" << render_relation_stats(rs);
  if (out_dir) {
    ensure_dir(*out_dir);
    ojson j;
    j["corpus"] = ojson::parse(corpus_stats_json(cs));
    j["relations"] = ojson::parse(relation_stats_json(rs));
    write_text(*out_dir / "stats.json", j.dump(2));
  }
  return kExitOk;
}

NamedExamples test_examples(const PreparedRun& run, const PipelineOptions& pipeline) {
  NamedExamples tests;
  tests.emplace_back("test", prepared(run.raw.test, pipeline));
  for (const auto& [name, corpus] : run.extra_tests) tests.emplace_back(name, prepared(corpus, pipeline));
  return tests;
}

int cmd_train(const fs::path& config_path, const Common& common, const fs::path& out_dir, std::ostream& out) {
  RunConfig c = resolve_run_config(config_path, common);
  const std::string resolved = run_config_to_json(c);
  echo("train", resolved);
  ensure_dir(out_dir);
  write_text(out_dir / "resolved_config.json", resolved);

  const PreparedRun run = prepare_run(c);
  const auto train_set = prepared(run.raw.train, c.data.pipeline);
  const auto val_set = prepared(run.raw.val, c.data.pipeline);
  const Vocab vocab = build_vocab(example_tokens(train_set), c.data.min_count);
  c.model.vocab_size = vocab.size();
  log::info("train/val/test sizes: " + std::to_string(train_set.size()) + "/" + std::to_string(val_set.size()) + "/" +
            std::to_string(run.raw.test.size()) + ", vocabulary " + std::to_string(vocab.size()));

  TrainResult result = train(train_set, val_set, vocab, c.model, c.train);

  Checkpoint ckpt;
  ckpt.config = c.model;
  ckpt.params = result.params;
  ckpt.vocab = vocab;
  ckpt.optimizer = result.optimizer;
  ckpt.epoch = result.history.best_epoch;
  ckpt.rng_state = result.rng_state;
  save_checkpoint(out_dir / "checkpoint.bin", ckpt);
  write_text(out_dir / "history.json", history_json(result.history));

  NamedSummaries summaries;
  for (const auto& [name, examples] : test_examples(run, c.data.pipeline)) {
    if (examples.empty()) continue;
    summaries.emplace_back(name, summarize({evaluate(c.model, result.params, vocab, examples).metrics}));
  }
  const std::string metrics = metrics_json(summaries);
  write_text(out_dir / "metrics.json", metrics);
  out << metrics << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& corpus_path, std::size_t trials,
             const std::optional<fs::path>& config_path, const std::optional<fs::path>& embeddings_path,
             const std::optional<std::string>& attention_id, const Common& common, const fs::path& out_dir,
             std::ostream& out) {
  std::optional<RunConfig> rc;
  if (config_path) rc = resolve_run_config(*config_path, common);
  ojson echo_json = {{"command", "eval"},
                     {"checkpoint", checkpoint_path.string()},
                     {"corpus", corpus_path.string()},
                     {"trials", trials},
                     {"export_embeddings", embeddings_path ? embeddings_path->string() : ""},
                     {"export_attention", attention_id.value_or("")},
                     {"out", out_dir.string()}};
  if (rc) echo_json["run"] = ojson::parse(run_config_to_json(*rc));
  echo("eval", echo_json.dump());
  if (trials == 0) throw std::invalid_argument("--trials must be >= 1");
  if (trials > 1 && !rc) throw std::invalid_argument("--trials > 1 retrains and needs --config");

  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (rc) {
    ModelConfig expected = rc->model;
    expected.vocab_size = ckpt.config.vocab_size;
    if (auto field = first_difference(ckpt.config, expected)) {
      throw MismatchError("checkpoint config differs from --config in field '" + *field + "'");
    }
  }
  if (ckpt.vocab.size() != ckpt.config.vocab_size) {
    throw MismatchError("checkpoint vocabulary size does not match its config");
  }
  const PipelineOptions pipeline = rc ? rc->data.pipeline : PipelineOptions{};
  PreparedCorpus pc = prepare_corpus(load_or_throw(corpus_path), pipeline);
  if (pc.examples.empty()) throw MismatchError(corpus_path.string() + " has no usable documents");
  std::size_t known = 0;
  for (const auto& toks : example_tokens(pc.examples))
    for (const auto& t : toks) known += ckpt.vocab.lookup(t) != Vocab::kUnk;
  if (known == 0) throw MismatchError(corpus_path.string() + " shares no tokens with the checkpoint vocabulary");

  ensure_dir(out_dir);
  NamedSummaries summaries;
  if (trials == 1) {
    summaries.emplace_back("test", summarize({evaluate(ckpt.config, ckpt.params, ckpt.vocab, pc.examples).metrics}));
  } else {
    const PreparedRun run = prepare_run(*rc);
    TrialData data;
    data.train = prepared(run.raw.train, rc->data.pipeline);
    data.val = prepared(run.raw.val, rc->data.pipeline);
    data.tests.emplace_back("test", pc.examples);
    summaries = run_trials(data, rc->model, rc->train, trials, rc->data.min_count);
  }
  const std::string metrics = metrics_json(summaries);
  write_text(out_dir / "metrics.json", metrics);
  out << metrics << "\n";

  if (embeddings_path) export_embeddings(ckpt.config, ckpt.params, ckpt.vocab, pc.examples, *embeddings_path);
  if (attention_id) {
    auto it = std::find_if(pc.examples.begin(), pc.examples.end(),
                           [&](const Example& e) { return e.id == *attention_id; });
    if (it == pc.examples.end()) throw std::invalid_argument("no document with id '" + *attention_id + "'");
    export_attention(ckpt.config, ckpt.params, ckpt.vocab, *it, out_dir / ("attention_" + *attention_id + ".json"));
  }
  return kExitOk;
}

int cmd_ablate(const fs::path& config_path, const Common& common, std::optional<std::size_t> trials,
               const fs::path& out_dir, std::ostream& out) {
  RunConfig c = resolve_run_config(config_path, common);
  if (trials) c.trials = *trials;
  c.validate();
  const std::string resolved = run_config_to_json(c);
  echo("ablate", resolved);
  ensure_dir(out_dir);
  write_text(out_dir / "resolved_config.json", resolved);

  PreparedRun run = prepare_run(c);
  RawSplits raw;
  raw.train = std::move(run.raw.train);
  raw.val = std::move(run.raw.val);
  raw.tests.emplace_back("test", std::move(run.raw.test));
  for (auto& t : run.extra_tests) raw.tests.push_back(std::move(t));
  const auto rows = ablation_suite(raw, c.data.pipeline, c.model, c.train, c.trials, c.data.min_count);
  const std::string table = render_ablation_table(rows);
  write_text(out_dir / "ablation.json", ablation_json(rows));
  write_text(out_dir / "ablation.txt", table);
  out << table;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"EDU-based discourse-structure fake news detection", "edu4fd"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed override (beats EDU4FD_SEED and the config file)");
  app.add_flag("--quiet", common.quiet, "Only print warnings and errors");

  fs::path in, out_path, config, out_dir = "run", checkpoint, corpus;
  std::string seg_mode = "gold", graph_mode = "heuristic";
  std::size_t max_edu_len = kDefaultMaxEduLen;
  bool inverse = true, self = true;
  std::size_t eval_trials = 1;
  std::optional<std::size_t> ablate_trials;
  std::optional<fs::path> stats_out, eval_config, embeddings;
  std::optional<std::string> attention_id;

  auto* seg = app.add_subcommand("segment", "Segment documents into EDUs");
  seg->add_option("in", in, "Input corpus (JSON lines)")->required();
  seg->add_option("--out,-o", out_path, "Output corpus")->required();
  seg->add_option("--mode", seg_mode, "gold|rule|sentence")->capture_default_str();
  seg->add_option("--max-edu-len", max_edu_len, "Truncate EDUs to this many tokens")->capture_default_str();

  auto* graph = app.add_subcommand("graph", "Attach discourse dependency graphs");
  graph->add_option("in", in, "Input corpus with edus")->required();
  graph->add_option("--out,-o", out_path, "Output corpus")->required();
  graph->add_option("--mode", graph_mode, "provided|heuristic|complete")->capture_default_str();
  graph->add_flag("--inverse,!--no-inverse", inverse, "Count inverse relation channels");
  graph->add_flag("--self,!--no-self", self, "Count the self channel");

  auto* stats = app.add_subcommand("stats", "Print corpus and relation statistics");
  stats->add_option("in", in, "Input corpus")->required();
  stats->add_option("--out,-o", stats_out, "Directory for stats.json");

  auto* tr = app.add_subcommand("train", "Train a model from a run config");
  tr->add_option("--config", config, "Run config (JSON)")->required();
  tr->add_option("--out,-o", out_dir, "Output directory")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  ev->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("corpus", corpus, "Test corpus")->required();
  ev->add_option("--trials", eval_trials, "Number of trials (> 1 retrains from --config)")->capture_default_str();
  ev->add_option("--config", eval_config, "Run config (JSON)");
  ev->add_option("--export-embeddings", embeddings, "Write text vectors as TSV");
  ev->add_option("--export-attention", attention_id, "Write attention weights of one document");
  ev->add_option("--out,-o", out_dir, "Output directory")->capture_default_str();

  auto* ab = app.add_subcommand("ablate", "Run the full model and its ablations");
  ab->add_option("--config", config, "Run config (JSON)")->required();
  ab->add_option("--trials", ablate_trials, "Trials per variant (default: config)");
  ab->add_option("--out,-o", out_dir, "Output directory")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, err;
    const int code = app.exit(e, msg, err);
    if (!msg.str().empty()) out << msg.str();
    if (!err.str().empty()) log::error(err.str());
    return code == 0 ? kExitOk : kExitUsage;
  }

  const bool was_quiet = log::quiet();
  log::set_quiet(common.quiet);
  int code = kExitOk;
  try {
    if (*seg) {
      code = cmd_segment(in, out_path, parse_segment_mode(seg_mode), max_edu_len, out);
    } else if (*graph) {
      code = cmd_graph(in, out_path, parse_graph_mode(graph_mode), inverse, self, out);
    } else if (*stats) {
      code = cmd_stats(in, stats_out, out);
    } else if (*tr) {
      code = cmd_train(config, common, out_dir, out);
    } else if (*ev) {
      code = cmd_eval(checkpoint, corpus, eval_trials, eval_config, embeddings, attention_id, common, out_dir, out);
    } else if (*ab) {
      code = cmd_ablate(config, common, ablate_trials, out_dir, out);
    }
  } catch (const IoError& e) {
    log::error(e.what());
    code = kExitIo;
  } catch (const NonFiniteError& e) {
    log::error(std::string(e.what()) + " (document " + e.doc_id() + ")");
    code = kExitNonFinite;
  } catch (const GraphError& e) {
    log::error(std::string(e.what()));
    code = kExitInvalid;
  } catch (const CorpusError& e) {
    log::error(e.what());
    code = kExitInvalid;
  } catch (const CheckpointError& e) {
    log::error(e.what());
    code = kExitInvalid;
  } catch (const MismatchError& e) {
    log::error(e.what());
    code = kExitInvalid;
  } catch (const SegmentError& e) {
    log::error(e.what());
    code = kExitInvalid;
  } catch (const std::invalid_argument& e) {
    log::error(e.what());
    code = kExitInvalid;
  } catch (const std::exception& e) {
    log::error(e.what());
    code = kExitUsage;
  }
  log::set_quiet(was_quiet);
  return code;
}

}  // namespace edu4fd
