#include "nfgnn/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"
#include "nfgnn/log.hpp"
#include "nfgnn/metrics.hpp"

namespace nfgnn {

Task parse_task(const std::string& s) {
  if (s == "binary") return Task::Binary;
  if (s == "category") return Task::Category;
  if (s == "family") return Task::Family;
  if (s == "unsupervised") return Task::Unsupervised;
  throw ConfigError(fmt::format("unknown task '{}' (binary, category, family, unsupervised)", s));
}

std::string to_string(Task t) {
  switch (t) {
    case Task::Binary: return "binary";
    case Task::Category: return "category";
    case Task::Family: return "family";
    case Task::Unsupervised: return "unsupervised";
  }
  return "?";
}

bool is_supervised(Task t) noexcept { return t != Task::Unsupervised; }

std::string model_name(const TrainConfig& c) {
  const std::string prefix = c.kind == ModelKind::NfGnn ? "nfgnn" : "mlp";
  switch (c.variant) {
    case Variant::Classifier: return c.kind == ModelKind::NfGnn ? "nfgnn-clf" : "mlp";
    case Variant::Autoencoder: return prefix + "-ae";
    case Variant::OneClass: return prefix + "-oc";
  }
  return prefix;
}

void set_model(TrainConfig& c, const std::string& name) {
  static const std::map<std::string, std::pair<ModelKind, Variant>> table = {
      {"nfgnn-clf", {ModelKind::NfGnn, Variant::Classifier}}, {"nfgnn-ae", {ModelKind::NfGnn, Variant::Autoencoder}},
      {"nfgnn-oc", {ModelKind::NfGnn, Variant::OneClass}},    {"mlp", {ModelKind::Mlp, Variant::Classifier}},
      {"mlp-clf", {ModelKind::Mlp, Variant::Classifier}},     {"mlp-ae", {ModelKind::Mlp, Variant::Autoencoder}},
      {"mlp-oc", {ModelKind::Mlp, Variant::OneClass}},
  };
  auto it = table.find(name);
  if (it == table.end()) {
    throw ConfigError(fmt::format("unknown model '{}' (nfgnn-clf, nfgnn-ae, nfgnn-oc, mlp, mlp-ae, mlp-oc)", name));
  }
  c.kind = it->second.first;
  c.variant = it->second.second;
}

namespace {

void validate(const TrainConfig& c) {
  if (c.num_layers != 1 && c.num_layers != 2) throw ConfigError(fmt::format("num_layers must be 1 or 2, got {}", c.num_layers));
  if (c.num_hidden < 1) throw ConfigError("num_hidden must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(c.l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (c.patience < 1) throw ConfigError("patience must be >= 1");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

void set_field(TrainConfig& c, const std::string& key, const json& v) {
  try {
    if (key == "model") set_model(c, v.get<std::string>());
    else if (key == "num_layers") c.num_layers = v.get<int>();
    else if (key == "num_hidden") c.num_hidden = v.get<int>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "dropout") c.dropout = v.get<double>();
    else if (key == "pool") c.pool = parse_pool(v.get<std::string>());
    else if (key == "lambda") c.lambda = v.get<double>();
    else if (key == "l2") c.l2 = v.get<double>();
    else if (key == "patience") c.patience = v.get<int>();
    else if (key == "max_epochs") c.max_epochs = v.get<int>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "criterion") {
      const auto name = v.get<std::string>();
      if (name == "metric") c.criterion = Criterion::Metric;
      else if (name == "loss") c.criterion = Criterion::Loss;
      else throw ConfigError(fmt::format("unknown criterion '{}' (metric, loss)", name));
    } else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else throw ConfigError(fmt::format("unknown training key '{}'", key));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"model", model_name(c)},       {"num_layers", c.num_layers}, {"num_hidden", c.num_hidden},
          {"learning_rate", c.learning_rate}, {"dropout", c.dropout},   {"pool", to_string(c.pool)},
          {"lambda", c.lambda},           {"l2", c.l2},                 {"patience", c.patience},
          {"max_epochs", c.max_epochs},   {"batch_size", c.batch_size}, {"seed", c.seed},
          {"criterion", c.criterion == Criterion::Metric ? "metric" : "loss"}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  // The model name goes first so that later keys are not reset by it.
  if (j.contains("model")) set_field(base, "model", j["model"]);
  for (const auto& [k, v] : j.items()) {
    if (k != "model") set_field(base, k, v);
  }
  validate(base);
  return base;
}

// Data ----------------------------------------------------------------------

namespace {

int normal_binary_index(const ClassMaps& maps) {
  for (std::size_t i = 0; i < maps.binary.names.size(); ++i) {
    std::string n = maps.binary.names[i];
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (n == "benign" || n == "normal") return static_cast<int>(i);
  }
  return 0;
}

std::string label_name(const ClassMap& map, int index) {
  if (index >= 0 && static_cast<std::size_t>(index) < map.size()) return map.names[static_cast<std::size_t>(index)];
  return std::to_string(index);
}

}  // namespace

ExperimentData experiment_data(const FlowDataset& dataset, const DataOptions& opts, int min_family_count) {
  ExperimentData d;
  d.class_maps = dataset.class_maps;
  d.min_family_count = min_family_count;
  d.feature_set = opts.feature_set;
  for (const auto& s : dataset.samples) {
    d.ids.push_back(s.sample_id);
    d.labels.push_back(s.labels);
  }
  if (opts.graphs) {
    d.edge_feature_names = aggregate_feature_names(dataset.feature_names);
    d.graphs.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) d.graphs.push_back(build_flow_graph(s));
  }
  if (opts.features) {
    d.feature_names = feature_set_names(opts.feature_set, dataset.feature_names);
    d.features = Tensor(dataset.samples.size(), d.feature_names.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      const auto row = sample_features(dataset.samples[i], opts.feature_set);
      std::copy(row.begin(), row.end(), d.features.row(i).begin());
    }
  }
  return d;
}

ExperimentData experiment_data_from_graphs(GraphFile file) {
  ExperimentData d;
  d.edge_feature_names = std::move(file.feature_names);
  for (const auto& g : file.graphs) {
    d.ids.push_back(g.sample_id);
    d.labels.push_back(g.labels);
  }
  d.graphs = std::move(file.graphs);
  return d;
}

namespace {

const std::vector<std::string> kTableLabelColumns = {"label_binary", "label_category", "label_family"};

}  // namespace

ExperimentData experiment_data_from_table(const std::filesystem::path& csv) {
  const auto rows = read_csv_file(csv);
  if (rows.empty()) throw EmptyInput("feature table is empty: " + csv.string());
  const auto& header = rows[0];
  if (header.size() < 4 || header[0] != "id" || !std::equal(kTableLabelColumns.begin(), kTableLabelColumns.end(), header.begin() + 1)) {
    throw MissingColumn("feature table must start with id,label_binary,label_category,label_family: " + csv.string());
  }
  ExperimentData d;
  d.feature_names.assign(header.begin() + 4, header.end());
  const std::size_t n = rows.size() - 1, w = d.feature_names.size();
  d.features = Tensor(n, w);
  std::vector<std::array<std::string, 3>> names(n);
  std::set<std::string> levels[3];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    if (r.size() != header.size()) {
      throw InconsistentDimension(fmt::format("{}: row {} has {} fields, expected {}", csv.string(), i + 2, r.size(), header.size()));
    }
    d.ids.push_back(r[0]);
    for (int k = 0; k < 3; ++k) names[i][static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(k) + 1];
    if (names[i][1].empty()) names[i][1] = names[i][0];
    for (int k = 0; k < 3; ++k) {
      if (!names[i][static_cast<std::size_t>(k)].empty()) levels[k].insert(names[i][static_cast<std::size_t>(k)]);
    }
    for (std::size_t c = 0; c < w; ++c) {
      const std::string& cell = r[c + 4];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw NonNumericFeature(fmt::format("{}: row {} column '{}' holds '{}'", csv.string(), i + 2, header[c + 4], cell));
      }
      d.features(i, c) = v;
    }
  }
  d.class_maps.binary.names.assign(levels[0].begin(), levels[0].end());
  d.class_maps.category.names.assign(levels[1].begin(), levels[1].end());
  d.class_maps.family.names.assign(levels[2].begin(), levels[2].end());
  for (std::size_t i = 0; i < n; ++i) {
    if (names[i][0].empty()) {
      d.labels.emplace_back();
      continue;
    }
    LabelTriple t;
    t.binary = *d.class_maps.binary.index_of(names[i][0]);
    t.category = *d.class_maps.category.index_of(names[i][1]);
    if (!names[i][2].empty()) t.family = *d.class_maps.family.index_of(names[i][2]);
    d.labels.push_back(t);
  }
  return d;
}

void write_feature_table(const std::filesystem::path& csv, const ExperimentData& data) {
  if (!data.has_features()) throw ConfigError("no per-sample features to write");
  std::string out = "id";
  for (const auto& c : kTableLabelColumns) out += "," + c;
  for (const auto& n : data.feature_names) out += "," + csv_escape(n);
  out += "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += csv_escape(data.ids[i]);
    const auto& l = data.labels[i];
    if (l) {
      out += "," + csv_escape(label_name(data.class_maps.binary, l->binary));
      out += "," + csv_escape(label_name(data.class_maps.category, l->category));
      out += "," + (l->family ? csv_escape(label_name(data.class_maps.family, *l->family)) : std::string());
    } else {
      out += ",,,";
    }
    for (double v : data.features.row(i)) out += "," + format_real(v);
    out += "\n";
  }
  write_text_file(csv, out);
}

ExperimentData load_experiment_data(const std::filesystem::path& path, const DataOptions& opts) {
  if (!std::filesystem::exists(path)) throw ConfigError("data file not found: " + path.string());
  const std::string ext = path.extension().string();
  if (ext == ".json") {
    const Manifest m = read_manifest(path);
    return experiment_data(load_dataset(m, path.parent_path()), opts, m.min_family_count);
  }
  if (ext == ".jsonl") {
    if (opts.features) throw ConfigError("per-sample feature sets need a manifest or a feature table, not graph JSONL");
    return experiment_data_from_graphs(read_graphs(path));
  }
  if (ext == ".csv") {
    if (opts.graphs) throw ConfigError("a feature table holds no graphs; use a manifest or graph JSONL for NF-GNN models");
    return experiment_data_from_table(path);
  }
  throw ConfigError(fmt::format("cannot tell the data format of '{}' (.json, .jsonl or .csv)", path.string()));
}

std::vector<int> task_targets(const ExperimentData& data, Task task) {
  std::vector<int> t(data.size(), -1);
  const int normal = normal_binary_index(data.class_maps);
  std::map<int, int> family_counts;
  if (task == Task::Family) {
    for (const auto& l : data.labels) {
      if (l && l->family) ++family_counts[*l->family];
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& l = data.labels[i];
    if (!l) continue;
    switch (task) {
      case Task::Binary: t[i] = l->binary; break;
      case Task::Category: t[i] = l->category; break;
      case Task::Family:
        if (l->family && family_counts[*l->family] >= data.min_family_count) t[i] = *l->family;
        break;
      case Task::Unsupervised: t[i] = l->binary == normal ? 0 : 1; break;
    }
  }
  return t;
}

std::size_t num_classes(const ExperimentData& data, Task task) {
  if (task == Task::Unsupervised) return 2;
  std::size_t n = 0;
  switch (task) {
    case Task::Binary: n = data.class_maps.binary.size(); break;
    case Task::Category: n = data.class_maps.category.size(); break;
    case Task::Family: n = data.class_maps.family.size(); break;
    case Task::Unsupervised: break;
  }
  for (int t : task_targets(data, task)) n = std::max(n, static_cast<std::size_t>(t + 1));
  return std::max<std::size_t>(n, 2);
}

SplitPlan make_split(const ExperimentData& data, Task task, std::uint64_t seed, const SplitOptions& opts) {
  const auto targets = task_targets(data, task);
  switch (task) {
    case Task::Binary: return supervised_split(targets, LabelLevel::Binary, seed, opts.supervised);
    case Task::Category: return supervised_split(targets, LabelLevel::Category, seed, opts.supervised);
    case Task::Family: return supervised_split(targets, LabelLevel::Family, seed, opts.supervised);
    case Task::Unsupervised: return unsupervised_split(targets, seed, opts.train_fraction);
  }
  throw ConfigError("unknown task");
}

// Trained model -------------------------------------------------------------

TrainedModel::TrainedModel(TrainConfig config, Task task, std::size_t num_classes, std::size_t in_features)
    : config_(config), task_(task), num_classes_(num_classes), in_features_(in_features) {
  validate(config_);
  if (in_features_ == 0) throw ConfigError("no non-constant feature columns remain after standardization");
  if (is_supervised(task_) != (config_.variant == Variant::Classifier)) {
    throw ConfigError(fmt::format("model '{}' does not fit the {} task", model_name(config_), to_string(task_)));
  }
  Rng seeder(config_.seed);
  const std::uint64_t init_seed = seeder();
  if (config_.kind == ModelKind::NfGnn) {
    ModelConfig mc;
    mc.variant = config_.variant;
    mc.num_layers = config_.num_layers;
    mc.num_hidden = config_.num_hidden;
    mc.pool = config_.pool;
    mc.dropout = config_.dropout;
    mc.lambda = config_.lambda;
    mc.in_features = in_features_;
    mc.num_classes = num_classes_;
    gnn_ = std::make_unique<NfGnnModel>(mc, init_seed);
  } else {
    MlpConfig mc;
    mc.variant = config_.variant;
    mc.num_layers = config_.num_layers;
    mc.num_hidden = config_.num_hidden;
    mc.l2 = config_.l2;
    mc.in_features = in_features_;
    mc.num_classes = num_classes_;
    mlp_ = std::make_unique<MlpModel>(mc, init_seed);
  }
}

ModuleStore& TrainedModel::store() { return gnn_ ? gnn_->store() : mlp_->store(); }
const ModuleStore& TrainedModel::store() const { return gnn_ ? gnn_->store() : mlp_->store(); }

std::optional<Tensor> TrainedModel::center() const { return gnn_ ? gnn_->center() : mlp_->center(); }

void TrainedModel::set_center(Tensor c) {
  if (gnn_) gnn_->set_center(std::move(c));
  else mlp_->set_center(std::move(c));
}

namespace {

Tensor take_rows(const Tensor& m, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy(m.row(rows[k]).begin(), m.row(rows[k]).end(), out.row(k).begin());
  }
  return out;
}

Tensor stack_edge_rows(const ExperimentData& data, std::span<const std::size_t> indices) {
  std::size_t m = 0, w = 0;
  for (std::size_t i : indices) {
    m += data.graphs[i].edge_features.rows();
    w = data.graphs[i].edge_features.cols();
  }
  Tensor out(m, w);
  std::size_t r = 0;
  for (std::size_t i : indices) {
    const Tensor& x = data.graphs[i].edge_features;
    if (x.cols() != w) throw InconsistentDimension("graphs differ in edge feature width");
    std::copy(x.data().begin(), x.data().end(), out.row(r).begin());
    r += x.rows();
  }
  return out;
}

// Eval-mode passes go through chunks to bound memory on large splits.
constexpr std::size_t kEvalChunk = 512;

}  // namespace

ModelInputs TrainedModel::inputs(const ExperimentData& data, std::span<const std::size_t> indices) const {
  ModelInputs in;
  for (std::size_t i : indices) {
    if (i >= data.size()) throw ShapeMismatch(fmt::format("sample index {} out of range", i));
  }
  if (config_.kind == ModelKind::NfGnn) {
    if (!data.has_graphs()) throw ConfigError("NF-GNN models need graph inputs");
    in.graphs.reserve(indices.size());
    for (std::size_t i : indices) {
      in.graphs.push_back(make_graph_input(data.graphs[i], standardize_apply(standardizer, data.graphs[i].edge_features)));
    }
  } else {
    if (!data.has_features()) throw ConfigError("MLP models need per-sample feature vectors");
    in.features = standardize_apply(standardizer, take_rows(data.features, indices));
  }
  return in;
}

Tensor TrainedModel::predict_proba(const ModelInputs& in) {
  if (config_.variant != Variant::Classifier) throw ConfigError("class probabilities need a classifier model");
  if (mlp_) return mlp_->predict_proba(in.features);
  Tensor out(in.size(), num_classes_);
  for (std::size_t start = 0; start < in.size(); start += kEvalChunk) {
    std::vector<std::size_t> idx(std::min(kEvalChunk, in.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor p = gnn_->predict_proba(make_batch(in.graphs, idx));
    std::copy(p.data().begin(), p.data().end(), out.row(start).begin());
  }
  return out;
}

std::vector<int> TrainedModel::predict(const ModelInputs& in) {
  const Tensor p = predict_proba(in);
  std::vector<int> y(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto r = p.row(i);
    y[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return y;
}

std::vector<double> TrainedModel::anomaly_scores(const ModelInputs& in) {
  if (config_.variant == Variant::Classifier) throw ConfigError("anomaly scores need an autoencoder or one-class model");
  if (mlp_) return mlp_->anomaly_scores(in.features);
  std::vector<double> out;
  out.reserve(in.size());
  for (std::size_t start = 0; start < in.size(); start += kEvalChunk) {
    std::vector<std::size_t> idx(std::min(kEvalChunk, in.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto s = gnn_->anomaly_scores(make_batch(in.graphs, idx));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

double TrainedModel::metric(const ModelInputs& in, std::span<const int> targets) {
  if (targets.size() != in.size()) throw ShapeMismatch("targets and inputs differ in length");
  if (targets.empty()) throw EmptyInput("cannot compute a metric on an empty split");
  if (config_.variant == Variant::Classifier) return weighted_f1(targets, predict(in));
  try {
    return auroc(anomaly_scores(in), targets);
  } catch (const std::invalid_argument& e) {
    throw EmptyInput(std::string("AUROC undefined: ") + e.what());
  }
}

std::string metric_name(const TrainConfig& c) { return c.variant == Variant::Classifier ? "weighted_f1" : "auroc"; }

double validation_criterion(TrainedModel& model, const ModelInputs& in, std::span<const int> targets) {
  if (model.variant() == Variant::Classifier) return model.metric(in, targets);
  const bool both = std::find(targets.begin(), targets.end(), 0) != targets.end() &&
                    std::find(targets.begin(), targets.end(), 1) != targets.end();
  if (both) return model.metric(in, targets);
  const auto s = model.anomaly_scores(in);
  return -std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

namespace {

std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < order.size(); s += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + batch_size)));
  }
  // Batch norm needs two rows; a trailing singleton joins the previous batch.
  if (batches.size() > 1 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

}  // namespace

std::unique_ptr<TrainedModel> train_model(const ExperimentData& data, Task task, const TrainConfig& config,
                                          const SplitPlan& split) {
  validate(config);
  if (split.train.empty()) throw EmptyInput("training split is empty");
  if (split.val.empty()) throw EmptyInput("validation split is empty");

  Standardizer st;
  if (config.kind == ModelKind::NfGnn) {
    if (!data.has_graphs()) throw ConfigError("NF-GNN models need graph inputs");
    st = standardize_fit(stack_edge_rows(data, split.train));
  } else {
    if (!data.has_features()) throw ConfigError("MLP models need per-sample feature vectors");
    st = standardize_fit(take_rows(data.features, split.train));
  }

  auto model = std::make_unique<TrainedModel>(config, task, num_classes(data, task), st.output_width());
  model->standardizer = std::move(st);
  model->split = split;
  model->feature_set = data.feature_set;

  const auto targets = task_targets(data, task);
  const ModelInputs train_in = model->inputs(data, split.train);
  const ModelInputs val_in = model->inputs(data, split.val);
  const std::vector<int> y_train = gather(targets, split.train);
  const std::vector<int> y_val = gather(targets, split.val);

  Rng seeder(config.seed);
  seeder.discard(1);  // the first draw seeded the initial weights
  Rng rng(seeder());

  if (config.variant == Variant::OneClass) {
    if (model->gnn()) model->gnn()->init_center(train_in.graphs);
    else model->mlp()->init_center(train_in.features);
  }

  const auto params = model->store().params().all();
  AdamState adam;
  adam.lr = config.learning_rate;
  ModuleStore::State best = model->store().snapshot();

  TrainHooks hooks;
  hooks.run_epoch = [&](int) {
    std::vector<std::size_t> order(train_in.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const auto& b : make_batches(std::move(order), config.batch_size)) {
      const std::vector<int> yb = gather(y_train, b);
      ad::Tape tape;
      ad::Var loss;
      if (model->gnn()) {
        loss = model->gnn()->loss(tape, make_batch(train_in.graphs, b), yb, Mode::Train, rng);
      } else {
        loss = model->mlp()->loss(tape, take_rows(train_in.features, b), yb, Mode::Train, rng);
      }
      tape.backward(loss);
      adam_step(params, adam);
      total += loss.value()[0] * static_cast<double>(b.size());
    }
    return total / static_cast<double>(train_in.size());
  };
  hooks.validate = [&] {
    if (config.criterion == Criterion::Metric) return validation_criterion(*model, val_in, y_val);
    ad::Tape tape;
    Rng eval_rng(0);
    ad::Var loss;
    if (model->gnn()) loss = model->gnn()->loss(tape, make_batch(val_in.graphs), y_val, Mode::Eval, eval_rng);
    else loss = model->mlp()->loss(tape, val_in.features, y_val, Mode::Eval, eval_rng);
    return -loss.value()[0];
  };
  hooks.save_best = [&] { best = model->store().snapshot(); };
  hooks.restore_best = [&] { model->store().restore(best); };

  EarlyStoppingConfig es{config.patience, config.max_epochs};
  model->history = run_early_stopping(es, hooks);
  logger().debug("{} seed {}: best epoch {} of {}, criterion {:.6f}", model_name(config), config.seed,
                  model->history.best_epoch, model->history.epochs.size(), model->history.best_criterion);
  return model;
}

json history_to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_criterion", e.val_criterion},
                      {"best_criterion", e.best_criterion}});
  }
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"best_criterion", h.best_criterion},
          {"stopped_early", h.stopped_early}};
}

TrainHistory history_from_json(const json& j) {
  TrainHistory h;
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_criterion").get<double>(),
                        e.at("best_criterion").get<double>()});
  }
  h.best_epoch = j.at("best_epoch").get<int>();
  h.best_criterion = j.at("best_criterion").get<double>();
  h.stopped_early = j.at("stopped_early").get<bool>();
  return h;
}

// Grid search ---------------------------------------------------------------

const std::vector<std::string>& grid_keys() {
  static const std::vector<std::string> keys = {"num_layers", "num_hidden", "learning_rate", "dropout",
                                                "pool",       "l2",         "lambda"};
  return keys;
}

std::size_t Grid::size() const noexcept {
  std::size_t n = 1;
  for (const auto& [k, v] : axes) n *= v.size();
  return n;
}

json Grid::cell(std::size_t i) const {
  if (i >= size()) throw ConfigError(fmt::format("grid cell {} out of range ({} cells)", i, size()));
  json out = json::object();
  for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
    out[it->first] = it->second[i % it->second.size()];
    i /= it->second.size();
  }
  return out;
}

TrainConfig Grid::apply(const TrainConfig& base, std::size_t i) const {
  TrainConfig c = base;
  const json values = cell(i);
  for (const auto& [k, v] : values.items()) set_field(c, k, v);
  validate(c);
  return c;
}

Grid grid_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("grid must be a JSON object of key -> list of values");
  for (const auto& [k, v] : j.items()) {
    if (std::find(grid_keys().begin(), grid_keys().end(), k) == grid_keys().end()) {
      throw ConfigError(fmt::format("unknown grid key '{}'", k));
    }
    if (!v.is_array() || v.empty()) throw ConfigError(fmt::format("grid axis '{}' must be a non-empty list", k));
  }
  Grid g;
  for (const auto& k : grid_keys()) {
    if (!j.contains(k)) continue;
    g.axes.emplace_back(k, std::vector<json>(j[k].begin(), j[k].end()));
    // Reject bad values up front instead of inside a worker.
    for (const auto& v : g.axes.back().second) {
      TrainConfig probe;
      set_field(probe, k, v);
      validate(probe);
    }
  }
  return g;
}

json to_json(const Grid& g) {
  json j = json::object();
  for (const auto& [k, v] : g.axes) j[k] = v;
  return j;
}

Grid default_grid(const TrainConfig& c) {
  const std::vector<json> layers = {1, 2}, hidden = {16, 32, 64, 128};
  Grid g;
  g.axes.emplace_back("num_layers", layers);
  g.axes.emplace_back("num_hidden", hidden);
  if (c.kind == ModelKind::NfGnn) {
    g.axes.emplace_back("learning_rate", std::vector<json>{1e-3, 1e-2});
    g.axes.emplace_back("dropout", std::vector<json>{0.0, 0.2, 0.4, 0.6});
    g.axes.emplace_back("pool", std::vector<json>{"mean", "add", "max"});
  } else {
    g.axes.emplace_back("l2", std::vector<json>{0.0, 1e-1, 1e-2, 1e-3, 1e-4});
  }
  return g;
}

Grid unit_grid() { return Grid{}; }

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t nthreads = std::min<std::size_t>(std::max(1u, workers), n);
  std::vector<std::exception_ptr> errors(n);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  // The lowest failing index wins so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

GridResult grid_search(const ExperimentData& data, Task task, const TrainConfig& base, const Grid& grid,
                       const SplitPlan& split, unsigned workers) {
  const std::size_t n = grid.size();
  GridResult r;
  r.cells.resize(n);
  std::mutex mu;
  bool have_best = false;
  parallel_for(n, workers, [&](std::size_t i) {
    const TrainConfig cfg = grid.apply(base, i);
    auto model = train_model(data, task, cfg, split);
    GridCell cell{i, grid.cell(i), model->history.best_criterion, model->history.best_epoch,
                  static_cast<int>(model->history.epochs.size())};
    std::lock_guard lock(mu);
    r.cells[i] = cell;
    if (!have_best || cell.val_criterion > r.cells[r.best_index].val_criterion ||
        (cell.val_criterion == r.cells[r.best_index].val_criterion && i < r.best_index)) {
      have_best = true;
      r.best_index = i;
      r.best_config = cfg;
      r.best_model = std::move(model);
    }
  });
  if (split.test.empty()) throw EmptyInput("test split is empty");
  const auto targets = task_targets(data, task);
  const ModelInputs test_in = r.best_model->inputs(data, split.test);
  r.test_metric = r.best_model->metric(test_in, gather(targets, split.test));
  return r;
}

json to_json(const GridResult& r, Task task) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"index", c.index}, {"params", c.params}, {"val_criterion", c.val_criterion},
                     {"best_epoch", c.best_epoch}, {"epochs_run", c.epochs_run}});
  }
  return {{"task", to_string(task)},
          {"model", model_name(r.best_config)},
          {"metric", metric_name(r.best_config)},
          {"cells", cells},
          {"best_index", r.best_index},
          {"best_config", to_json(r.best_config)},
          {"test_metric", r.test_metric}};
}

ProtocolReport run_protocol(const ExperimentData& data, Task task, const TrainConfig& base, const Grid& grid,
                            const ProtocolOptions& opts) {
  if (opts.repeats < 1) throw ConfigError("repeats must be >= 1");
  ProtocolReport rep;
  rep.task = to_string(task);
  rep.model = model_name(base);
  rep.metric = metric_name(base);
  rep.per_seed.resize(opts.repeats);
  rep.selected.resize(opts.repeats);
  for (std::size_t k = 0; k < opts.repeats; ++k) rep.seeds.push_back(opts.seed + k);
  const bool outer = opts.repeats > 1;
  parallel_for(opts.repeats, outer ? opts.workers : 1, [&](std::size_t k) {
    const std::uint64_t seed = rep.seeds[k];
    const SplitPlan split = make_split(data, task, seed, opts.split);
    TrainConfig cfg = base;
    cfg.seed = seed;
    GridResult g = grid_search(data, task, cfg, grid, split, outer ? 1 : opts.workers);
    rep.per_seed[k] = g.test_metric;
    rep.selected[k] = g.cells[g.best_index].params;
    logger().info("{} {} seed {}: test {} {:.4f}", rep.model, rep.task, seed, rep.metric, g.test_metric);
  });
  const MeanStd ms = mean_std(rep.per_seed);
  rep.mean = ms.mean;
  rep.std = ms.std;
  return rep;
}

json to_json(const ProtocolReport& r) {
  return {{"task", r.task}, {"model", r.model}, {"metric", r.metric},     {"mean", r.mean},
          {"std", r.std},   {"seeds", r.seeds}, {"per_seed", r.per_seed}, {"selected", r.selected}};
}

std::string to_csv(const ProtocolReport& r) {
  std::string out = "task,model,metric,seed,value\n";
  for (std::size_t k = 0; k < r.per_seed.size(); ++k) {
    out += fmt::format("{},{},{},{},{}\n", r.task, r.model, r.metric, r.seeds[k], format_real(r.per_seed[k]));
  }
  out += fmt::format("{},{},{},mean,{}\n", r.task, r.model, r.metric, format_real(r.mean));
  out += fmt::format("{},{},{},std,{}\n", r.task, r.model, r.metric, format_real(r.std));
  return out;
}

}  // namespace nfgnn
