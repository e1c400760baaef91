#include "nfgnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nfgnn/checkpoint.hpp"
#include "nfgnn/errors.hpp"
#include "nfgnn/experiment.hpp"
#include "nfgnn/log.hpp"
#include "nfgnn/metrics.hpp"
#include "nfgnn/synth.hpp"

namespace fs = std::filesystem;

namespace nfgnn {

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(fmt::format("--set expects key=value, got '{}'", assignment));
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("empty path component in '{}'", key));
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError(fmt::format("'{}' crosses a non-object value", key));
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

const std::set<std::string> kKnownKeys = {"seed",  "out",     "workers",    "data",           "manifest",
                                          "task",  "model",   "train",      "grid",           "repeats",
                                          "synth", "feature_set", "train_fraction", "quota", "val_fraction",
                                          "min_family_count", "checkpoint"};

struct Shared {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
  bool verbose = false;
  bool quiet = false;
};

json load_config(const Shared& s) {
  json c = s.config_path.empty() ? json::object() : read_json_file(s.config_path);
  if (!c.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& a : s.sets) apply_override(c, a);
  if (s.seed) c["seed"] = *s.seed;
  if (!s.out.empty()) c["out"] = s.out;
  if (s.workers) c["workers"] = *s.workers;
  for (const auto& [k, v] : c.items()) {
    if (!kKnownKeys.contains(k)) throw ConfigError(fmt::format("unknown config key '{}'", k));
  }
  return c;
}

template <typename T>
T get(const json& c, const std::string& key, T fallback) {
  if (!c.contains(key)) return fallback;
  try {
    return c.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

std::string require_string(const json& c, const std::string& key) {
  if (!c.contains(key)) throw ConfigError(fmt::format("config needs '{}'", key));
  return get<std::string>(c, key, "");
}

fs::path out_dir(const json& c) { return fs::path(require_string(c, "out")); }

std::uint64_t seed_of(const json& c) { return get<std::uint64_t>(c, "seed", 0); }
unsigned workers_of(const json& c) { return std::max(1u, get<unsigned>(c, "workers", 1)); }

Task task_of(const json& c) { return parse_task(get<std::string>(c, "task", "binary")); }

TrainConfig train_config_of(const json& c, Task task) {
  TrainConfig base;
  set_model(base, get<std::string>(c, "model", is_supervised(task) ? "nfgnn-clf" : "nfgnn-oc"));
  if (c.contains("train")) base = train_config_from_json(c["train"], base);
  if (c.contains("model")) set_model(base, get<std::string>(c, "model", ""));
  base.seed = seed_of(c);
  return base;
}

DataOptions data_options(ModelKind kind, FeatureSet fs) {
  DataOptions o;
  o.graphs = kind == ModelKind::NfGnn;
  o.features = kind == ModelKind::Mlp;
  o.feature_set = fs;
  return o;
}

ExperimentData load_data(const json& c, ModelKind kind, FeatureSet fs) {
  ExperimentData d = load_experiment_data(require_string(c, "data"), data_options(kind, fs));
  d.feature_set = fs;
  if (c.contains("min_family_count")) d.min_family_count = get<int>(c, "min_family_count", 9);
  return d;
}

SplitOptions split_options(const json& c) {
  SplitOptions o;
  o.train_fraction = get<double>(c, "train_fraction", 0.20);
  o.supervised.quota = get<std::size_t>(c, "quota", 0);
  o.supervised.val_fraction = get<double>(c, "val_fraction", -1.0);
  return o;
}

std::vector<int> gather(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

// --- commands ---------------------------------------------------------------

int cmd_extract(const json& c, std::ostream& out) {
  const fs::path manifest = require_string(c, "manifest");
  const fs::path dir = out_dir(c);
  const Manifest m = read_manifest(manifest);
  const FlowDataset ds = load_dataset(m, manifest.parent_path());
  logger().info("extract: {} samples, {} flow features", ds.samples.size(), ds.dim());
  const ExperimentData graphs = experiment_data(ds, DataOptions{true, false, FeatureSet::Combined}, m.min_family_count);
  write_graphs(dir / "graphs.jsonl", graphs.graphs, graphs.edge_feature_names);
  json files = json::array({(dir / "graphs.jsonl").string()});
  json widths = json::object();
  for (FeatureSet set : {FeatureSet::Flow, FeatureSet::Graph, FeatureSet::Combined}) {
    const ExperimentData d = experiment_data(ds, DataOptions{false, true, set}, m.min_family_count);
    const fs::path p = dir / fmt::format("features_{}.csv", to_string(set));
    write_feature_table(p, d);
    files.push_back(p.string());
    widths[to_string(set)] = d.feature_names.size();
  }
  out << dump_json({{"samples", ds.samples.size()}, {"files", files}, {"feature_widths", widths}}) << "\n";
  return kExitOk;
}

int cmd_synth(const json& c, std::ostream& out) {
  const SynthSpec spec = synth_spec_from_json(c.value("synth", json::object()));
  const fs::path dir = out_dir(c);
  const FlowDataset ds = synth_generate(spec, seed_of(c));
  write_dataset(ds, dir);
  logger().info("synth: wrote {} samples to {}", ds.samples.size(), dir.string());
  out << dump_json({{"samples", ds.samples.size()}, {"manifest", (dir / "manifest.json").string()}, {"spec", to_json(spec)}})
      << "\n";
  return kExitOk;
}

FeatureSet feature_set_of(const json& c) { return parse_feature_set(get<std::string>(c, "feature_set", "combined")); }

json summary(const TrainedModel& m, Task task, std::optional<double> test) {
  json j = {{"task", to_string(task)},
            {"model", model_name(m.config())},
            {"metric", metric_name(m.config())},
            {"best_epoch", m.history.best_epoch},
            {"val_criterion", m.history.best_criterion},
            {"epochs_run", m.history.epochs.size()}};
  j["test_metric"] = test ? json(*test) : json(nullptr);
  return j;
}

int cmd_train(const json& c, std::ostream& out) {
  const Task task = task_of(c);
  const TrainConfig cfg = train_config_of(c, task);
  const fs::path dir = out_dir(c);
  const ExperimentData data = load_data(c, cfg.kind, feature_set_of(c));
  const SplitPlan split = make_split(data, task, cfg.seed, split_options(c));
  logger().info("train: {} on {} ({} train / {} val / {} test)", model_name(cfg), to_string(task), split.train.size(),
                split.val.size(), split.test.size());
  auto model = train_model(data, task, cfg, split);
  std::optional<double> test;
  if (!split.test.empty()) {
    const auto targets = task_targets(data, task);
    test = model->metric(model->inputs(data, split.test), gather(targets, split.test));
  }
  save_checkpoint(dir / "checkpoint.json", *model);
  write_text_file(dir / "history.json", dump_json(history_to_json(model->history)) + "\n");
  const json s = summary(*model, task, test);
  write_text_file(dir / "summary.json", dump_json(s) + "\n");
  out << dump_json(s) << "\n";
  return kExitOk;
}

Grid grid_of(const json& c, const TrainConfig& base) {
  if (!c.contains("grid") || (c["grid"].is_string() && c["grid"] == "default")) return default_grid(base);
  return grid_from_json(c["grid"]);
}

int cmd_gridsearch(const json& c, std::ostream& out) {
  const Task task = task_of(c);
  const TrainConfig base = train_config_of(c, task);
  const Grid grid = grid_of(c, base);
  const fs::path dir = out_dir(c);
  const ExperimentData data = load_data(c, base.kind, feature_set_of(c));
  const unsigned workers = workers_of(c);
  if (c.contains("repeats")) {
    ProtocolOptions po;
    po.repeats = get<std::size_t>(c, "repeats", 30);
    po.seed = base.seed;
    po.workers = workers;
    po.split = split_options(c);
    logger().info("protocol: {} on {}, {} repeats x {} grid cells", model_name(base), to_string(task), po.repeats,
                  grid.size());
    const ProtocolReport rep = run_protocol(data, task, base, grid, po);
    write_text_file(dir / "report.json", dump_json(to_json(rep)) + "\n");
    write_text_file(dir / "report.csv", to_csv(rep));
    out << dump_json(to_json(rep)) << "\n";
    return kExitOk;
  }
  const SplitPlan split = make_split(data, task, base.seed, split_options(c));
  logger().info("gridsearch: {} on {}, {} cells, {} workers", model_name(base), to_string(task), grid.size(), workers);
  GridResult r = grid_search(data, task, base, grid, split, workers);
  const json report = to_json(r, task);
  write_text_file(dir / "gridsearch.json", dump_json(report) + "\n");
  write_text_file(dir / "best_config.json", dump_json(to_json(r.best_config)) + "\n");
  save_checkpoint(dir / "checkpoint.json", *r.best_model);
  write_text_file(dir / "history.json", dump_json(history_to_json(r.best_model->history)) + "\n");
  out << dump_json(report) << "\n";
  return kExitOk;
}

json per_class_json(std::span<const int> y_true, std::span<const int> y_pred) {
  json a = json::array();
  for (const auto& s : per_class_scores(y_true, y_pred)) {
    a.push_back({{"label", s.label}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  }
  return a;
}

int cmd_evaluate(const json& c, std::ostream& out) {
  auto model = load_checkpoint(require_string(c, "checkpoint"));
  const Task task = model->task();
  if (c.contains("task") && task_of(c) != task) {
    throw ConfigError(fmt::format("checkpoint was trained for the {} task", to_string(task)));
  }
  const fs::path dir = out_dir(c);
  const ExperimentData data = load_data(c, model->config().kind, model->feature_set);
  const auto targets = task_targets(data, task);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> parts;
  const auto& sp = model->split;
  std::size_t max_index = 0;
  for (const auto* v : {&sp.train, &sp.val, &sp.test}) {
    for (std::size_t i : *v) max_index = std::max(max_index, i + 1);
  }
  if (max_index <= data.size()) {
    parts = {{"train", sp.train}, {"val", sp.val}, {"test", sp.test}};
  } else {
    logger().warn("evaluate: data does not match the checkpoint split; reporting all labelled samples only");
  }
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (targets[i] >= 0) all.push_back(i);
  }
  parts.emplace_back("all", all);

  const std::string metric = metric_name(model->config());
  json splits = json::object();
  std::string csv = "split,metric,value,count\n";
  for (const auto& [name, idx] : parts) {
    if (idx.empty()) continue;
    const ModelInputs in = model->inputs(data, idx);
    const auto y = gather(targets, idx);
    json entry = {{"count", idx.size()}};
    try {
      const double v = model->metric(in, y);
      entry["value"] = v;
      csv += fmt::format("{},{},{},{}\n", name, metric, format_real(v), idx.size());
    } catch (const EmptyInput& e) {
      logger().warn("evaluate: {} split: {}", name, e.what());
      entry["value"] = nullptr;
      csv += fmt::format("{},{},,{}\n", name, metric, idx.size());
    }
    if (model->variant() == Variant::Classifier) entry["per_class"] = per_class_json(y, model->predict(in));
    splits[name] = entry;
  }
  const json report = {{"task", to_string(task)}, {"model", model_name(model->config())}, {"metric", metric}, {"splits", splits}};
  write_text_file(dir / "evaluation.json", dump_json(report) + "\n");
  write_text_file(dir / "evaluation.csv", csv);
  out << dump_json(report) << "\n";
  return kExitOk;
}

int cmd_score(const json& c, std::ostream& out) {
  auto model = load_checkpoint(require_string(c, "checkpoint"));
  const ExperimentData data = load_data(c, model->config().kind, model->feature_set);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const ModelInputs in = model->inputs(data, idx);
  std::string csv = "id";
  if (model->variant() == Variant::Classifier) {
    for (std::size_t k = 0; k < model->num_classes(); ++k) csv += fmt::format(",prob_{}", k);
    csv += "\n";
    const Tensor p = model->predict_proba(in);
    for (std::size_t i = 0; i < data.size(); ++i) {
      csv += csv_escape(data.ids[i]);
      for (double v : p.row(i)) csv += "," + format_real(v);
      csv += "\n";
    }
  } else {
    csv += ",score\n";
    const auto s = model->anomaly_scores(in);
    for (std::size_t i = 0; i < data.size(); ++i) csv += csv_escape(data.ids[i]) + "," + format_real(s[i]) + "\n";
  }
  if (c.contains("out")) {
    fs::path p = require_string(c, "out");
    if (fs::is_directory(p) || p.extension().empty()) p /= "scores.csv";
    write_text_file(p, csv);
  } else {
    out << csv;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow-graph neural network toolkit", "nfgnn"};
  app.require_subcommand(1);
  Shared shared;
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", shared.config_path, "JSON run config");
    sub->add_option("--set", shared.sets, "Override a config value: key.path=value")->take_all();
    sub->add_option("--seed", shared.seed, "Root random seed");
    sub->add_option("--out", shared.out, "Output directory (file or stdout for score)");
    sub->add_option("--workers", shared.workers, "Parallel worker threads");
    sub->add_flag("-v,--verbose", shared.verbose, "Debug logging");
    sub->add_flag("-q,--quiet", shared.quiet, "Warnings and errors only");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const json&, std::ostream&);
  };
  const Command commands[] = {
      {"extract", "Flow CSVs -> graph JSONL and feature tables", cmd_extract},
      {"synth", "Write a synthetic flow dataset", cmd_synth},
      {"train", "Train one configuration with early stopping", cmd_train},
      {"gridsearch", "Grid search on one split, or the repeated protocol when 'repeats' is set", cmd_gridsearch},
      {"evaluate", "Metrics of a checkpoint on a dataset", cmd_evaluate},
      {"score", "Per-sample class probabilities or anomaly scores", cmd_score},
  };
  std::vector<CLI::App*> subs;
  for (const auto& cmd : commands) {
    subs.push_back(app.add_subcommand(cmd.name, cmd.help));
    add_shared(subs.back());
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  const auto level = shared.verbose ? spdlog::level::debug : shared.quiet ? spdlog::level::warn : spdlog::level::info;
  logger().set_level(level);
  try {
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (subs[k]->parsed()) return commands[k].fn(load_config(shared), out);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    logger().error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    logger().error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace nfgnn
