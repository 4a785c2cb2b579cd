#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "dgseq/diffcore/checkpoint.hpp"
#include "dgseq/errors.hpp"
#include "dgseq/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dgseq;
using cli::RunManifest;

namespace {

std::string g_command;  // argv joined, recorded in manifests

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---- configuration --------------------------------------------------------

struct RunConfig {
  TrainConfig train;
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  std::uint64_t split_seed = 0;
};

json to_json(const RunConfig& c) {
  auto j = dgseq::to_json(c.train);
  j["split_ratios"] = c.split_ratios;
  j["split_seed"] = c.split_seed;
  return j;
}

RunConfig run_config_from_json(json j) {
  RunConfig c;
  try {
    if (j.contains("split_ratios")) {
      c.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
      j.erase("split_ratios");
    }
    if (j.contains("split_seed")) {
      c.split_seed = j.at("split_seed").get<std::uint64_t>();
      j.erase("split_seed");
    }
  } catch (const json::exception&) {
    throw ConfigError("split_ratios must be three numbers and split_seed an unsigned integer");
  }
  c.train = train_config_from_json(j);
  return c;
}

struct ModelFlags {
  std::optional<std::string> mode;
  std::optional<std::string> pooling;
  std::optional<std::string> graph_attention;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "dynamic | static_aggregate | sequence_only");
    cmd->add_option("--pooling", pooling, "max | attention");
    cmd->add_option("--graph-attention", graph_attention, "on | off");
    cmd->add_option("--seed", seed, "training seed");
  }

  void apply(RunConfig& c) const {
    if (mode) c.train.model.mode = parse_model_mode(*mode);
    if (pooling) c.train.model.encoder.pooling = parse_pooling(*pooling);
    if (graph_attention) {
      if (*graph_attention != "on" && *graph_attention != "off") {
        throw ConfigError("graph-attention: expected on|off, got '" + *graph_attention + "'");
      }
      c.train.model.graph_attention = *graph_attention == "on";
    }
    if (seed) c.train.seed = *seed;
  }
};

// Node count and feature width always come from the data; a config that
// names different values is rejected.
void bind_dimensions(RunConfig& c, const json& raw, const std::vector<DynGraphSample>& data) {
  const auto& first = data.front().snapshots.front();
  const int n = static_cast<int>(first.num_nodes());
  const int d = static_cast<int>(first.feature_dim());
  if (raw.contains("num_nodes") && c.train.model.encoder.num_nodes != n) {
    throw DataError("config num_nodes " + std::to_string(c.train.model.encoder.num_nodes) + " but dataset has " +
                    std::to_string(n));
  }
  if (raw.contains("feature_dim") && c.train.model.encoder.feature_dim != d) {
    throw DataError("config feature_dim " + std::to_string(c.train.model.encoder.feature_dim) +
                    " but dataset has " + std::to_string(d));
  }
  c.train.model.encoder.num_nodes = n;
  c.train.model.encoder.feature_dim = d;
}

std::vector<DynGraphSample> load_dataset(const fs::path& path, bool allow_unlabelled) {
  auto samples = read_dataset(path);
  if (samples.empty()) throw DataError("dataset " + path.string() + " has no samples");
  const auto n = samples.front().snapshots.front().num_nodes();
  const auto d = samples.front().snapshots.front().feature_dim();
  for (const auto& s : samples) {
    validate(s, allow_unlabelled);
    if (s.snapshots.front().num_nodes() != n || s.snapshots.front().feature_dim() != d) {
      throw DataError("sample " + s.user_id + " has a different node count or feature width");
    }
  }
  return samples;
}

void check_against_model(const ModelConfig& model, const std::vector<DynGraphSample>& data) {
  const auto& snap = data.front().snapshots.front();
  if (snap.num_nodes() != model.encoder.num_nodes || snap.feature_dim() != model.encoder.feature_dim) {
    throw DataError("dataset has N=" + std::to_string(snap.num_nodes()) + ", D=" +
                    std::to_string(snap.feature_dim()) + " but the checkpoint expects N=" +
                    std::to_string(model.encoder.num_nodes) + ", D=" + std::to_string(model.encoder.feature_dim));
  }
}

struct LoadedModel {
  RunConfig config;
  Params params;
};

LoadedModel load_model(const fs::path& path) {
  auto ckpt = load_checkpoint(path);
  return {run_config_from_json(ckpt.config), std::move(ckpt.params)};
}

std::string token_names(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out += ' ';
    out += StageVocabulary::token(t);
  }
  return out;
}

json token_array(const std::vector<int>& tokens) {
  auto arr = json::array();
  for (int t : tokens) arr.push_back(std::string(StageVocabulary::token(t)));
  return arr;
}

// ---- generate-data --------------------------------------------------------

struct GenerateArgs {
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a) {
  const json raw = a.config ? read_json_file(*a.config) : json::object();
  auto config = synthetic_config_from_json(raw);
  if (a.seed) config.seed = *a.seed;
  const auto ds = generate_synthetic(config);

  fs::create_directories(a.out);
  const auto dataset_path = a.out / "dataset.jsonl";
  const auto truth_path = a.out / "ground_truth.json";
  write_dataset(ds.samples, dataset_path);

  json truth{{"planted_subforum", json::object()}, {"profiles", json::array()}, {"window_stages", json::object()}};
  for (std::size_t s = 0; s < ds.planted_subforum.size(); ++s) {
    truth["planted_subforum"][std::string(StageVocabulary::token(static_cast<int>(s)))] = ds.planted_subforum[s];
  }
  for (const auto& p : ds.profiles) {
    truth["profiles"].push_back(std::vector<double>(p.topic.data(), p.topic.data() + p.topic.size()));
  }
  for (std::size_t u = 0; u < ds.samples.size(); ++u) {
    truth["window_stages"][ds.samples[u].user_id] = token_array(ds.window_stages[u]);
  }
  write_text(truth_path, truth.dump(1) + "\n");

  RunManifest manifest(g_command, to_json(config), config.seed);
  if (a.config) manifest.input(*a.config);
  manifest.output(dataset_path);
  manifest.output(truth_path);
  manifest.write(a.out / "manifest.json");
  std::cout << "wrote " << ds.samples.size() << " samples to " << dataset_path.string() << '\n';
  return 0;
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  fs::path events;
  fs::path profiles;
  std::optional<fs::path> targets;
  std::int64_t window_seconds = kDefaultWindowSeconds;
  fs::path out;
};

int cmd_ingest(const IngestArgs& a) {
  const auto events = read_event_log(a.events);
  const auto profiles = read_profiles(a.profiles);
  const auto targets = a.targets ? read_targets(*a.targets) : std::vector<std::pair<std::string, std::vector<int>>>{};
  const auto samples = samples_from_events(events, a.window_seconds, profiles, targets);
  fs::create_directories(a.out);
  const auto dataset_path = a.out / "dataset.jsonl";
  write_dataset(samples, dataset_path);

  RunManifest manifest(g_command, json{{"window_seconds", a.window_seconds}}, 0);
  manifest.input(a.events);
  manifest.input(a.profiles);
  if (a.targets) manifest.input(*a.targets);
  manifest.output(dataset_path);
  manifest.write(a.out / "manifest.json");
  std::cout << "wrote " << samples.size() << " samples to " << dataset_path.string() << '\n';
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::optional<fs::path> config;
  fs::path dataset;
  fs::path out;
  std::optional<fs::path> resume;
  ModelFlags flags;
};

int cmd_train(const TrainArgs& a) {
  const auto data = load_dataset(a.dataset, false);
  std::optional<LoadedModel> prior;
  if (a.resume) prior = load_model(*a.resume);

  const json raw = a.config ? read_json_file(*a.config) : prior ? to_json(prior->config) : json::object();
  RunConfig config = run_config_from_json(raw);
  a.flags.apply(config);
  bind_dimensions(config, raw, data);
  if (prior && dgseq::to_json(prior->config.train.model) != dgseq::to_json(config.train.model)) {
    throw ConfigError("resume: model settings differ from the checkpoint's");
  }

  const auto split = split_dataset(data, config.split_ratios, config.split_seed);
  const auto result = train(split.train, split.validation, config.train, prior ? &prior->params : nullptr,
                            [](const EpochRecord& e) {
                              std::fprintf(stderr, "epoch %d loss %.6f val_bleu1 %.2f\n", e.epoch, e.loss,
                                           e.val_bleu1);
                            });

  fs::create_directories(a.out);
  const auto best_path = a.out / "checkpoint.json";
  const auto last_path = a.out / "last.json";
  const auto log_path = a.out / "runlog.jsonl";
  save_checkpoint({to_json(config), result.best}, best_path);
  save_checkpoint({to_json(config), result.last}, last_path);
  write_run_log(result.log, log_path);

  RunManifest manifest(g_command, to_json(config), config.train.seed);
  manifest.set("mode", std::string(to_string(config.train.model.mode)));
  manifest.set("pooling", std::string(to_string(config.train.model.encoder.pooling)));
  manifest.set("graph_attention", config.train.model.graph_attention);
  if (a.config) manifest.input(*a.config);
  if (a.resume) manifest.input(*a.resume);
  manifest.input(a.dataset);
  manifest.output(best_path);
  manifest.output(last_path);
  manifest.output(log_path);
  manifest.write(a.out / "manifest.json");

  const auto& last = result.log.epochs.back();
  std::cout << "trained " << result.log.epochs.size() << " epochs; best epoch " << result.log.best_epoch
            << "; final loss " << last.loss << "; best val BLEU-1 "
            << result.log.epochs[static_cast<std::size_t>(result.log.best_epoch - 1)].val_bleu1 << '\n';
  return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> config;
  fs::path dataset;
  std::optional<fs::path> out;
  int runs = 1;
  std::string split = "test";
  bool resample_splits = false;
  ModelFlags flags;
};

std::vector<DynGraphSample> pick_split(const DatasetSplit& s, const std::vector<DynGraphSample>& all,
                                       const std::string& which) {
  if (which == "train") return s.train;
  if (which == "validation") return s.validation;
  if (which == "test") return s.test;
  if (which == "all") return all;
  throw ConfigError("split: expected train|validation|test|all, got '" + which + "'");
}

json report_json(const EvalReport& report, const std::string& label) {
  json j{{"label", label}, {"runs", report.runs}, {"summary", json::object()}};
  for (const char* m : EvalReport::kColumns) {
    const auto s = report.summary(m);
    j["summary"][m] = {{"mean", s.mean}, {"sd", s.sd}};
  }
  return j;
}

int cmd_evaluate(const EvaluateArgs& a) {
  if (a.runs < 1) throw ConfigError("runs must be >= 1");
  const auto data = load_dataset(a.dataset, false);
  EvalReport report;
  RunConfig config;
  std::string label;

  if (a.checkpoint) {
    const auto model = load_model(*a.checkpoint);
    config = model.config;
    check_against_model(config.train.model, data);
    const auto split = split_dataset(data, config.split_ratios, config.split_seed);
    const auto target = pick_split(split, data, a.split);
    report = evaluate_checkpoint(model.params, config.train.model, target, a.runs);
  } else {
    const json raw = a.config ? read_json_file(*a.config) : json::object();
    config = run_config_from_json(raw);
    a.flags.apply(config);
    bind_dimensions(config, raw, data);
    const auto fixed = split_dataset(data, config.split_ratios, config.split_seed);
    for (int r = 0; r < a.runs; ++r) {
      TrainConfig run = config.train;
      run.seed = config.train.seed + static_cast<std::uint64_t>(r);
      const auto split = a.resample_splits
                             ? split_dataset(data, config.split_ratios, config.split_seed + static_cast<std::uint64_t>(r))
                             : fixed;
      const auto trained = train(split.train, split.validation, run);
      const auto target = pick_split(split, data, a.split);
      report.add_run(decode_corpus(trained.best, run.model, target), references(target));
      std::fprintf(stderr, "run %d/%d done (best epoch %d)\n", r + 1, a.runs, trained.log.best_epoch);
    }
  }
  label = std::string(to_string(config.train.model.mode));
  const std::string table = report.table(label);
  std::cout << table;

  if (a.out) {
    fs::create_directories(*a.out);
    const auto report_path = *a.out / "report.json";
    const auto table_path = *a.out / "report.txt";
    write_text(report_path, report_json(report, label).dump(2) + "\n");
    write_text(table_path, table);
    RunManifest manifest(g_command, to_json(config), config.train.seed);
    manifest.set("runs", a.runs);
    manifest.set("split", a.split);
    manifest.set("resample_splits", a.resample_splits);
    if (a.checkpoint) manifest.input(*a.checkpoint);
    if (a.config) manifest.input(*a.config);
    manifest.input(a.dataset);
    manifest.output(report_path);
    manifest.output(table_path);
    manifest.write(*a.out / "manifest.json");
  }
  return 0;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  fs::path checkpoint;
  fs::path dataset;
  std::optional<fs::path> out;
};

int cmd_predict(const PredictArgs& a) {
  const auto model = load_model(a.checkpoint);
  const auto data = load_dataset(a.dataset, true);
  check_against_model(model.config.train.model, data);
  std::ostringstream lines;
  for (const auto& s : data) {
    const auto decoded = predict(model.params, model.config.train.model, s);
    std::cout << s.user_id << '\t' << token_names(decoded.tokens) << '\n';
    json rec{{"user_id", s.user_id}, {"tokens", token_array(decoded.tokens)}};
    if (!s.target.empty()) rec["target"] = token_array(s.target);
    lines << rec.dump() << '\n';
  }
  if (a.out) {
    fs::create_directories(a.out->parent_path().empty() ? fs::path(".") : a.out->parent_path());
    write_text(*a.out, lines.str());
    RunManifest manifest(g_command, to_json(model.config), model.config.train.seed);
    manifest.input(a.checkpoint);
    manifest.input(a.dataset);
    manifest.output(*a.out);
    manifest.write(a.out->string() + ".manifest.json");
  }
  return 0;
}

// ---- explain --------------------------------------------------------------

struct ExplainArgs {
  fs::path checkpoint;
  fs::path dataset;
  std::string sample;
  fs::path out;
};

std::string matrix_csv(const std::string& header, const TensorD& m) {
  std::ostringstream out;
  out.precision(17);
  out << header << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
  return out.str();
}

int cmd_explain(const ExplainArgs& a) {
  const auto model = load_model(a.checkpoint);
  const auto data = load_dataset(a.dataset, true);
  check_against_model(model.config.train.model, data);
  const auto it = std::find_if(data.begin(), data.end(), [&](const auto& s) { return s.user_id == a.sample; });
  if (it == data.end()) throw DataError("no sample with user_id '" + a.sample + "' in " + a.dataset.string());

  const auto& cfg = model.config.train.model;
  const auto trace = encode_trace(model.params, cfg, *it);
  const auto decoded = greedy_decode(trace, model.params, cfg, cfg.max_len);
  const auto steps = trace.encoder_hiddens.rows();

  fs::create_directories(a.out);
  RunManifest manifest(g_command, to_json(model.config), model.config.train.seed);
  manifest.input(a.checkpoint);
  manifest.input(a.dataset);
  json summary{{"user_id", it->user_id},
               {"mode", std::string(to_string(cfg.mode))},
               {"tokens", token_array(decoded.tokens)},
               {"steps", steps},
               {"files", json::object()}};

  if (cfg.graph_attention) {
    const auto path = a.out / "beta.csv";
    write_text(path, matrix_csv("# beta rows=decoded_token:" + std::to_string(decoded.graph_attention.rows()) +
                                    " cols=snapshot:" + std::to_string(steps),
                                decoded.graph_attention));
    summary["files"]["beta"] = path.filename().string();
    manifest.output(path);
  }
  if (!trace.node_attention.empty()) {
    const auto n = trace.node_attention.front().rows();
    TensorD alpha(static_cast<Eigen::Index>(trace.node_attention.size()), n);
    TensorD argmax_nodes(alpha.rows(), 1);
    for (Eigen::Index t = 0; t < alpha.rows(); ++t) {
      alpha.row(t) = trace.node_attention[static_cast<std::size_t>(t)].transpose();
      Eigen::Index best = 0;
      alpha.row(t).maxCoeff(&best);
      argmax_nodes(t, 0) = static_cast<double>(best);
    }
    const auto alpha_path = a.out / "alpha.csv";
    const auto argmax_path = a.out / "argmax_nodes.csv";
    write_text(alpha_path, matrix_csv("# alpha rows=snapshot:" + std::to_string(alpha.rows()) +
                                          " cols=node:" + std::to_string(n),
                                      alpha));
    write_text(argmax_path,
               matrix_csv("# argmax_node rows=snapshot:" + std::to_string(alpha.rows()) + " cols=node_id:1",
                          argmax_nodes));
    summary["files"]["alpha"] = alpha_path.filename().string();
    summary["files"]["argmax_nodes"] = argmax_path.filename().string();
    manifest.output(alpha_path);
    manifest.output(argmax_path);
  }
  const auto summary_path = a.out / "explain.json";
  write_text(summary_path, summary.dump(2) + "\n");
  manifest.output(summary_path);
  manifest.write(a.out / "manifest.json");
  std::cout << it->user_id << '\t' << token_names(decoded.tokens) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Health-stage sequence prediction from dynamic forum-activity graphs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Generate a synthetic dataset with planted stage signals");
  g->add_option("--config", gen.config, "data config JSON")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "overrides the config seed");

  IngestArgs ing;
  auto* in = app.add_subcommand("ingest", "Build a dataset from an event log");
  in->add_option("--events", ing.events, "event log (JSON lines)")->required()->check(CLI::ExistingFile);
  in->add_option("--profiles", ing.profiles, "subforum profiles CSV")->required()->check(CLI::ExistingFile);
  in->add_option("--targets", ing.targets, "JSON object user_id -> stage tokens")->check(CLI::ExistingFile);
  in->add_option("--window-seconds", ing.window_seconds, "window length in seconds");
  in->add_option("--out", ing.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoints and the run log");
  t->add_option("--config", tr.config, "run config JSON")->check(CLI::ExistingFile);
  t->add_option("--dataset", tr.dataset, "dataset JSON lines")->required();
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--resume", tr.resume, "continue from this checkpoint");
  tr.flags.add_to(t);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint, or train and score over several seeds");
  e->add_option("--checkpoint", ev.checkpoint, "evaluate this checkpoint only");
  e->add_option("--config", ev.config, "run config JSON (train-and-evaluate)")->check(CLI::ExistingFile);
  e->add_option("--dataset", ev.dataset, "dataset JSON lines")->required();
  e->add_option("--out", ev.out, "directory for report.json, report.txt and the manifest");
  e->add_option("--runs", ev.runs, "number of runs");
  e->add_option("--split", ev.split, "train | validation | test | all");
  e->add_flag("--resample-splits", ev.resample_splits, "draw a fresh split per run");
  ev.flags.add_to(e);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Greedy-decode stage sequences");
  p->add_option("--checkpoint", pr.checkpoint, "checkpoint")->required();
  p->add_option("--dataset", pr.dataset, "dataset JSON lines")->required();
  p->add_option("--out", pr.out, "predictions file (JSON lines)");

  ExplainArgs ex;
  auto* x = app.add_subcommand("explain", "Export attention weights for one sample");
  x->add_option("--checkpoint", ex.checkpoint, "checkpoint")->required();
  x->add_option("--dataset", ex.dataset, "dataset JSON lines")->required();
  x->add_option("--sample", ex.sample, "user_id of the sample")->required();
  x->add_option("--out", ex.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*in) return cmd_ingest(ing);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*p) return cmd_predict(pr);
    if (*x) return cmd_explain(ex);
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 2;
}
