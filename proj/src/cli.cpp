#include "twa/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "twa/checkpoint.hpp"
#include "twa/compare.hpp"
#include "twa/experiment.hpp"
#include "twa/pairs.hpp"
#include "twa/synthetic.hpp"
#include "twa/tokenizer.hpp"
#include "twa/trainer.hpp"
#include "twa/unicode.hpp"

namespace twa {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Tracks files a subcommand creates; removes them unless committed.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) {
      if (fs::is_empty(*it, ec)) fs::remove(*it, ec);
    }
  }

  std::string file(const std::string& path) {
    files_.push_back(path);
    return path;
  }

  void directory(const fs::path& dir) {
    std::vector<fs::path> created;
    for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) created.push_back(p);
    fs::create_directories(dir);
    dirs_.insert(dirs_.end(), created.rbegin(), created.rend());
  }

  void commit() { committed_ = true; }

 private:
  std::vector<std::string> files_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw DataError(std::string(what) + " not found: " + path);
}

/// Character-level vocabulary over every text in the datasets.
Vocab char_vocab(const std::vector<const Dataset*>& datasets) {
  std::string corpus;
  for (const auto* d : datasets) {
    for (const auto& ex : d->examples) corpus += ex.source_text + ex.output_text;
  }
  if (corpus.empty()) corpus = " ";
  const auto distinct = [&] {
    auto chars = utf8_decode(corpus);
    std::sort(chars.begin(), chars.end());
    return static_cast<int>(std::unique(chars.begin(), chars.end()) - chars.begin());
  }();
  return build_vocab({corpus}, kNumReserved + distinct);
}

Vocab vocab_or_default(const std::string& path, const std::vector<const Dataset*>& datasets) {
  return path.empty() ? char_vocab(datasets) : load_vocab(path);
}

nlohmann::ordered_json weight_json(double w) {
  if (w == std::floor(w)) return static_cast<long>(w);
  return w;
}

// ----------------------------------------------------------------- gen
struct GenOptions {
  TaskSpec spec;
  int sources = 500;
  int systems = 6;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string corruption = "substitute";
};

void run_gen(const GenOptions& o, OutputGuard& guard, std::ostream& out) {
  TaskSpec spec = o.spec;
  spec.corruption = parse_corruption_type(o.corruption);
  const auto task = generate(spec, o.sources, o.systems, derive_seed(o.seed, "data"));
  guard.directory(o.out_dir);
  const fs::path dir(o.out_dir);
  write_dataset(guard.file((dir / "train.tsv").string()), task.train);
  write_dataset(guard.file((dir / "valid.tsv").string()), task.validation);
  write_dataset(guard.file((dir / "test.tsv").string()), task.test);
  write_clean_targets(guard.file((dir / "clean.tsv").string()), task.clean_targets);
  out << "train " << task.train.size() << " records, validation " << task.validation.size() << ", test "
      << task.test.size() << '\n';
}

// ----------------------------------------------------------------- ingest
struct IngestOptions {
  std::string input, output, vocab_out;
  int vocab_size = 0;
};

void run_ingest(const IngestOptions& o, OutputGuard& guard, std::ostream& out) {
  const Dataset d = read_dataset(o.input);
  int refs = 0, clean = 0;
  long tenths = 0;
  for (const auto& ex : d.examples) {
    refs += ex.is_reference ? 1 : 0;
    clean += ex.error_free() ? 1 : 0;
    tenths += std::lround(mqm_score(ex) * 10.0);
  }
  out << "records," << d.size() << "\nsources," << d.groups().size() << "\nreferences," << refs
      << "\nerror_free," << clean << "\nmean_mqm," << fmt(d.empty() ? 0.0 : tenths / 10.0 / d.size()) << '\n';
  if (!o.output.empty()) write_dataset(guard.file(o.output), d);
  if (!o.vocab_out.empty()) {
    std::vector<std::string> corpus;
    for (const auto& ex : d.examples) {
      corpus.push_back(ex.source_text);
      corpus.push_back(ex.output_text);
    }
    const Vocab v = o.vocab_size > 0 ? build_vocab(corpus, o.vocab_size) : char_vocab({&d});
    save_vocab(guard.file(o.vocab_out), v);
  }
}

// ----------------------------------------------------------------- align
struct AlignOptions {
  std::string data, vocab, output;
  bool keep_off_trajectory = false;
};

void run_align(const AlignOptions& o, OutputGuard& guard, std::ostream& out) {
  const Dataset d = read_dataset(o.data);
  const Vocab v = vocab_or_default(o.vocab, {&d});
  std::ostringstream buf;
  for (const auto& ex : d.examples) {
    const auto tok = encode(ex.output_text, v);
    const auto weights = assign_token_weights(tok, ex.spans, !o.keep_off_trajectory);
    nlohmann::ordered_json j;
    j["source_id"] = ex.source_id;
    j["system_id"] = ex.system_id;
    auto tokens = nlohmann::ordered_json::array();
    for (std::size_t i = 1; i < tok.token_ids.size(); ++i) {
      const int id = tok.token_ids[i];
      tokens.push_back(id == kEos ? std::string("</s>") : v.token(id));
    }
    j["tokens"] = std::move(tokens);
    auto w = nlohmann::ordered_json::array();
    for (double x : weights.weights) w.push_back(weight_json(x));
    j["weights"] = std::move(w);
    auto spans = nlohmann::ordered_json::array();
    for (const auto& s : weights.spans) {
      spans.push_back(nlohmann::ordered_json{{"start", s.start}, {"end", s.end}, {"weight", weight_json(s.weight)}});
    }
    j["spans"] = std::move(spans);
    buf << j.dump() << '\n';
  }
  if (o.output.empty()) {
    out << buf.str();
  } else {
    open_out(guard.file(o.output)) << buf.str();
  }
}

// ----------------------------------------------------------------- pairs
struct PairsOptions {
  std::string data, vocab, output;
  std::string preferred = "reference_and_submissions";
  std::string dispreferred = "all_submissions";
  std::string score_mode = "sum";
};

void run_pairs(const PairsOptions& o, OutputGuard& guard, std::ostream& out) {
  PairConfig config{parse_preferred_source(o.preferred), parse_dispreferred_source(o.dispreferred),
                    parse_score_mode(o.score_mode)};
  config.validate();
  const Dataset d = read_dataset(o.data);
  TokenCountFn counter;
  Vocab v;
  if (config.score_mode == ScoreMode::Mean) {
    v = vocab_or_default(o.vocab, {&d});
    counter = [&v](const AnnotatedExample& ex) { return encode(ex.output_text, v).num_text_tokens(); };
  }
  const auto result = build_pairs(d, config, counter);
  std::ostringstream buf;
  write_pairs(buf, result.pairs);
  if (o.output.empty()) {
    out << buf.str();
  } else {
    open_out(guard.file(o.output)) << buf.str();
    out << "pairs," << result.pairs.size() << "\nskipped_sources," << result.skipped_sources << '\n';
  }
}

// ----------------------------------------------------------------- train
struct TrainOptions {
  std::string config, data, pairs, valid, vocab, init, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void run_train(const TrainOptions& o, OutputGuard& guard, std::ostream& out) {
  TrainConfig tc;
  ModelConfig mc;
  if (!o.config.empty()) {
    require_file(o.config, "config");
    KeyValues kv = read_key_values(o.config);
    tc.apply(kv);
    apply_model_keys(kv, mc);
    require_consumed(kv, o.config);
  }
  if (o.seed_set) {
    tc.seed = derive_seed(o.seed, "shuffle");
    mc.seed = derive_seed(o.seed, "init");
  }
  tc.validate();
  const Dataset valid = read_dataset(o.valid);
  Dataset data;
  std::vector<PreferencePair> pairs;
  if (tc.method == Method::Dpo) {
    if (o.pairs.empty()) throw UsageError("method dpo needs --pairs");
    std::ifstream in(o.pairs, std::ios::binary);
    if (!in) throw DataError("cannot open pairs " + o.pairs);
    pairs = parse_pairs(in);
    for (const auto& p : pairs) {
      data.examples.push_back(p.preferred);
      data.examples.push_back(p.dispreferred);
    }
  } else {
    if (o.data.empty()) throw UsageError("--data is required");
    data = read_dataset(o.data);
  }
  const Vocab v = vocab_or_default(o.vocab, {&data, &valid});
  Seq2SeqModel<double> init;
  if (!o.init.empty()) {
    init = load_checkpoint(o.init);
    if (init.config.vocab_size != v.size()) throw DataError("initial checkpoint vocabulary size mismatch");
  } else {
    mc.vocab_size = v.size();
    init = make_model<double>(mc);
  }
  const auto validation = make_validation_set(valid, v);
  const std::vector<Metric> metrics{oracle_edit_metric()};
  const TrainResult r = tc.method == Method::Dpo
                            ? train_dpo(init, prepare_pairs(pairs, v), tc, validation, metrics, v)
                            : train(init, prepare_examples(data, v, tc), tc, validation, metrics, v);
  guard.directory(o.out_dir);
  const fs::path dir(o.out_dir);
  save_checkpoint(guard.file((dir / "checkpoint.json").string()), r.model);
  if (o.vocab.empty()) save_vocab(guard.file((dir / "vocab.json").string()), v);
  {
    auto log_file = open_out(guard.file((dir / "train_log.csv").string()));
    write_training_log(log_file, r.log);
  }
  out << "selected_step," << r.selected_step << "\nvalidation_score," << fmt(r.selected_score) << '\n';
}

// ----------------------------------------------------------------- eval
struct EvalOptions {
  std::vector<std::string> systems;  // name=path
  std::string test, vocab, clean, out_dir;
  int resamples = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

void write_comparison(const std::vector<SystemScores>& systems, const ClusterResult& clusters, const fs::path& dir,
                      const std::string& prefix, OutputGuard& guard) {
  {
    auto f = open_out(guard.file((dir / (prefix + "means.csv")).string()));
    f << "system,mean,rank\n";
    for (std::size_t i = 0; i < systems.size(); ++i) {
      f << systems[i].name << ',' << fmt(systems[i].mean()) << ',' << clusters.ranks[i] << '\n';
    }
  }
  {
    auto f = open_out(guard.file((dir / (prefix + "pvalues.csv")).string()));
    f << "system";
    for (const auto& s : systems) f << ',' << s.name;
    f << '\n';
    for (std::size_t i = 0; i < systems.size(); ++i) {
      f << systems[i].name;
      for (std::size_t j = 0; j < systems.size(); ++j) f << ',' << fmt(clusters.p_values[i][j]);
      f << '\n';
    }
  }
  {
    auto f = open_out(guard.file((dir / (prefix + "ranks.csv")).string()));
    f << "rank,system,mean\n";
    for (std::size_t idx : clusters.order) {
      f << clusters.ranks[idx] << ',' << systems[idx].name << ',' << fmt(systems[idx].mean()) << '\n';
    }
  }
}

void run_eval(const EvalOptions& o, OutputGuard& guard, std::ostream& out) {
  if (o.systems.empty()) throw UsageError("eval needs at least one --system name=path");
  Dataset test = read_dataset(o.test);
  if (!o.clean.empty()) {
    const auto table = read_clean_targets(o.clean);
    for (auto& ex : test.examples) {
      const auto it = table.find(ex.source_id);
      if (it == table.end()) throw DataError("no clean target for " + ex.source_id);
      ex.output_text = it->second;
    }
  }
  const Vocab v = load_vocab(o.vocab);
  const auto set = make_validation_set(test, v);
  std::vector<SystemScores> systems;
  for (const auto& spec : o.systems) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--system expects name=path, got '" + spec + "'");
    const auto model = load_checkpoint(spec.substr(eq + 1));
    if (model.config.vocab_size != v.size()) throw DataError("checkpoint " + spec + " vocabulary size mismatch");
    systems.push_back({spec.substr(0, eq), oracle_scores(model, set, v)});
  }
  const auto clusters = cluster_ranks(systems, o.alpha, o.resamples, derive_seed(o.seed, "bootstrap"));
  guard.directory(o.out_dir);
  write_comparison(systems, clusters, fs::path(o.out_dir), "eval_", guard);
  for (std::size_t i = 0; i < systems.size(); ++i) {
    out << systems[i].name << ',' << fmt(systems[i].mean()) << ',' << clusters.ranks[i] << '\n';
  }
}

// ----------------------------------------------------------------- rank-diff
struct RankDiffOptions {
  std::string base, trained, data, vocab, output;
};

void run_rank_diff(const RankDiffOptions& o, OutputGuard& guard, std::ostream& out) {
  const auto base = load_checkpoint(o.base);
  const auto trained = load_checkpoint(o.trained);
  const Dataset d = read_dataset(o.data);
  const Vocab v = load_vocab(o.vocab);
  const auto records = token_rank_change(base, trained, d, v);
  std::ostringstream buf;
  buf << "source_id,system_id,position,token,base_rank,trained_rank,delta,in_error_span\n";
  for (const auto& r : records) {
    buf << r.source_id << ',' << r.system_id << ',' << r.position << ',' << nlohmann::json(r.token).dump() << ','
        << r.base_rank << ',' << r.trained_rank << ',' << r.delta << ',' << (r.in_error_span ? 1 : 0) << '\n';
  }
  if (o.output.empty()) {
    out << buf.str();
  } else {
    open_out(guard.file(o.output)) << buf.str();
  }
}

// ----------------------------------------------------------------- stats
struct StatsOptions {
  std::string data, vocab, output;
  int bins = 10;
};

void run_stats(const StatsOptions& o, OutputGuard& guard, std::ostream& out) {
  const Dataset d = read_dataset(o.data);
  const Vocab v = vocab_or_default(o.vocab, {&d});
  const auto r = dataset_stats(d, v, o.bins);
  std::ostringstream buf;
  buf << "statistic,value\n";
  buf << "examples," << r.token_counts.size() << '\n';
  buf << "mean_tokens," << fmt(r.mean_tokens) << '\n';
  buf << "std_tokens," << fmt(r.std_tokens) << '\n';
  buf << "mean_error_proportion," << fmt(r.mean_error_proportion) << '\n';
  buf << "std_error_proportion," << fmt(r.std_error_proportion) << '\n';
  for (std::size_t b = 0; b < r.histogram_counts.size(); ++b) {
    buf << "bin[" << fmt(r.histogram_edges[b]) << ";" << fmt(r.histogram_edges[b + 1]) << ")," << r.histogram_counts[b]
        << '\n';
  }
  if (o.output.empty()) {
    out << buf.str();
  } else {
    open_out(guard.file(o.output)) << buf.str();
  }
}

// ----------------------------------------------------------------- ablate
/// Key=value manifest: seed, output_dir, methods (comma separated ladder
/// labels), config (optional experiment key=value file). Referenced paths
/// must exist.
struct ExperimentManifest {
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<std::string> methods;
  std::string config;

  static ExperimentManifest load(const std::string& path) {
    require_file(path, "manifest");
    KeyValues kv = read_key_values(path);
    ExperimentManifest m;
    take(kv, "seed", m.seed);
    take(kv, "output_dir", m.output_dir);
    take(kv, "config", m.config);
    std::string methods;
    take(kv, "methods", methods);
    std::stringstream ss(methods);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) m.methods.push_back(item);
    }
    require_consumed(kv, path);
    if (!m.config.empty()) {
      // Relative config paths resolve against the manifest's directory.
      fs::path c(m.config);
      if (c.is_relative()) m.config = (fs::path(path).parent_path() / c).string();
      require_file(m.config, "experiment config");
    }
    return m;
  }
};

struct AblateOptions {
  std::string manifest, config, out_dir;
  std::uint64_t seed = 0;
  bool include_nl = false;
};

void run_ablate(const AblateOptions& o, OutputGuard& guard, std::ostream& out) {
  ExperimentManifest m;
  if (!o.manifest.empty()) m = ExperimentManifest::load(o.manifest);
  if (!o.out_dir.empty()) m.output_dir = o.out_dir;
  if (o.manifest.empty()) m.seed = o.seed;
  if (!o.config.empty()) {
    require_file(o.config, "experiment config");
    m.config = o.config;
  }
  if (m.output_dir.empty()) throw UsageError("ablate needs --out-dir or output_dir in the manifest");
  if (m.methods.empty()) {
    for (const auto& s : ablation_ladder()) m.methods.push_back(s.label);
    if (o.include_nl) m.methods.push_back(negative_likelihood_step().label);
  }
  std::vector<LadderStep> steps;
  for (const auto& label : m.methods) steps.push_back(ladder_step(label));

  ExperimentSpec spec;
  if (!m.config.empty()) {
    KeyValues kv = read_key_values(m.config);
    spec.apply(kv);
    require_consumed(kv, m.config);
  }

  const auto prepared = prepare_experiment(spec, m.seed);
  guard.directory(m.output_dir);
  const fs::path dir(m.output_dir);
  guard.directory(dir / "data");
  write_dataset(guard.file((dir / "data" / "train.tsv").string()), prepared.task.train);
  write_dataset(guard.file((dir / "data" / "valid.tsv").string()), prepared.task.validation);
  write_dataset(guard.file((dir / "data" / "test.tsv").string()), prepared.task.test);
  write_clean_targets(guard.file((dir / "data" / "clean.tsv").string()), prepared.task.clean_targets);
  save_vocab(guard.file((dir / "vocab.json").string()), prepared.vocab);
  guard.directory(dir / "base");
  save_checkpoint(guard.file((dir / "base" / "checkpoint.json").string()), prepared.base);
  {
    auto log_file = open_out(guard.file((dir / "base" / "train_log.csv").string()));
    write_training_log(log_file, prepared.pretrain_result.log);
  }

  std::vector<SystemScores> systems;
  systems.push_back({"base", oracle_scores(prepared.base, prepared.test, prepared.vocab)});
  for (const auto& step : steps) {
    const auto outcome = run_step(prepared, spec, step, m.seed);
    guard.directory(dir / step.label);
    save_checkpoint(guard.file((dir / step.label / "checkpoint.json").string()), outcome.result.model);
    {
      auto log_file = open_out(guard.file((dir / step.label / "train_log.csv").string()));
      write_training_log(log_file, outcome.result.log);
    }
    systems.push_back({step.label, outcome.test_scores});
    out << step.label << ',' << fmt(outcome.test_mean) << ",selected_step=" << outcome.result.selected_step << '\n';
  }
  const auto clusters = cluster_ranks(systems, spec.alpha, spec.bootstrap_resamples, derive_seed(m.seed, "bootstrap"));
  write_comparison(systems, clusters, dir, "ablation_", guard);
  auto f = open_out(guard.file((dir / "ablation_scores.csv").string()));
  f << "source_id";
  for (const auto& s : systems) f << ',' << s.name;
  f << '\n';
  for (std::size_t i = 0; i < prepared.task.test.size(); ++i) {
    f << prepared.task.test.examples[i].source_id;
    for (const auto& s : systems) f << ',' << fmt(s.values[i]);
    f << '\n';
  }
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fine-tuning on span-level error annotations"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic annotated translation task");
  gen_cmd->add_option("--sources", gen.sources, "Training sources")->capture_default_str();
  gen_cmd->add_option("--systems", gen.systems, "Submissions per source")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--alphabet", gen.spec.alphabet_size)->capture_default_str();
  gen_cmd->add_option("--min-len", gen.spec.min_len)->capture_default_str();
  gen_cmd->add_option("--max-len", gen.spec.max_len)->capture_default_str();
  gen_cmd->add_option("--corruption-prob", gen.spec.corruption_prob)->capture_default_str();
  gen_cmd->add_option("--span-min", gen.spec.span_min)->capture_default_str();
  gen_cmd->add_option("--span-max", gen.spec.span_max)->capture_default_str();
  gen_cmd->add_option("--corruption", gen.corruption, "substitute | insert | delete")->capture_default_str();
  gen_cmd->add_option("--hard-symbols", gen.spec.hard_symbols)->capture_default_str();
  gen_cmd->add_option("--validation-sources", gen.spec.validation_sources)->capture_default_str();
  gen_cmd->add_option("--test-sources", gen.spec.test_sources)->capture_default_str();

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a dataset, optionally rewrite it and build a vocabulary");
  ingest_cmd->add_option("--input", ingest.input)->required();
  ingest_cmd->add_option("--output", ingest.output, "Canonical re-serialization");
  ingest_cmd->add_option("--vocab-out", ingest.vocab_out);
  ingest_cmd->add_option("--vocab-size", ingest.vocab_size, "0: character-level");

  AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "Print token weights and span grouping as JSON lines");
  align_cmd->add_option("--data", align.data)->required();
  align_cmd->add_option("--vocab", align.vocab, "Default: character-level over the data");
  align_cmd->add_option("--output", align.output);
  align_cmd->add_flag("--keep-off-trajectory", align.keep_off_trajectory, "Do not mask tokens after the first error");

  PairsOptions pairs;
  auto* pairs_cmd = app.add_subcommand("pairs", "Build preference pairs from MQM scores");
  pairs_cmd->add_option("--data", pairs.data)->required();
  pairs_cmd->add_option("--preferred", pairs.preferred)->capture_default_str();
  pairs_cmd->add_option("--dispreferred", pairs.dispreferred)->capture_default_str();
  pairs_cmd->add_option("--score-mode", pairs.score_mode)->capture_default_str();
  pairs_cmd->add_option("--vocab", pairs.vocab, "Tokenizer for --score-mode mean");
  pairs_cmd->add_option("--output", pairs.output);

  TrainOptions trn;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune a model");
  train_cmd->add_option("--config", trn.config, "key=value overrides");
  train_cmd->add_option("--data", trn.data);
  train_cmd->add_option("--pairs", trn.pairs, "Pair file (method dpo)");
  train_cmd->add_option("--valid", trn.valid)->required();
  train_cmd->add_option("--vocab", trn.vocab);
  train_cmd->add_option("--init", trn.init, "Initial checkpoint");
  train_cmd->add_option("--out-dir", trn.out_dir)->required();
  auto* seed_opt = train_cmd->add_option("--seed", trn.seed, "Derives init and shuffle seeds");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compare checkpoints with bootstrap significance clusters");
  eval_cmd->add_option("--system", ev.systems, "name=checkpoint (repeatable)")->required();
  eval_cmd->add_option("--test", ev.test)->required();
  eval_cmd->add_option("--vocab", ev.vocab)->required();
  eval_cmd->add_option("--clean", ev.clean, "Clean-target table overriding test outputs");
  eval_cmd->add_option("--out-dir", ev.out_dir)->required();
  eval_cmd->add_option("--resamples", ev.resamples)->capture_default_str();
  eval_cmd->add_option("--alpha", ev.alpha)->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();

  RankDiffOptions rd;
  auto* rd_cmd = app.add_subcommand("rank-diff", "Per-token rank change between two checkpoints");
  rd_cmd->add_option("--base", rd.base)->required();
  rd_cmd->add_option("--trained", rd.trained)->required();
  rd_cmd->add_option("--data", rd.data)->required();
  rd_cmd->add_option("--vocab", rd.vocab)->required();
  rd_cmd->add_option("--output", rd.output);

  StatsOptions st;
  auto* stats_cmd = app.add_subcommand("stats", "Token counts and error-token proportions");
  stats_cmd->add_option("--data", st.data)->required();
  stats_cmd->add_option("--vocab", st.vocab);
  stats_cmd->add_option("--bins", st.bins)->capture_default_str();
  stats_cmd->add_option("--output", st.output);

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the component ablation ladder on a synthetic task");
  ablate_cmd->add_option("--manifest", ab.manifest);
  ablate_cmd->add_option("--config", ab.config, "Experiment key=value file");
  ablate_cmd->add_option("--out-dir", ab.out_dir);
  ablate_cmd->add_option("--seed", ab.seed)->capture_default_str();
  ablate_cmd->add_flag("--include-nl", ab.include_nl, "Also train the negative-likelihood variant");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  OutputGuard guard;
  try {
    if (gen_cmd->parsed()) run_gen(gen, guard, out);
    if (ingest_cmd->parsed()) run_ingest(ingest, guard, out);
    if (align_cmd->parsed()) run_align(align, guard, out);
    if (pairs_cmd->parsed()) run_pairs(pairs, guard, out);
    if (train_cmd->parsed()) {
      trn.seed_set = seed_opt->count() > 0;
      run_train(trn, guard, out);
    }
    if (eval_cmd->parsed()) run_eval(ev, guard, out);
    if (rd_cmd->parsed()) run_rank_diff(rd, guard, out);
    if (stats_cmd->parsed()) run_stats(st, guard, out);
    if (ablate_cmd->parsed()) run_ablate(ab, guard, out);
    guard.commit();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace twa
