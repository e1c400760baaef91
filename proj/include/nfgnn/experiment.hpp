#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfgnn/early_stopping.hpp"
#include "nfgnn/flow_ingest.hpp"
#include "nfgnn/graph_builder.hpp"
#include "nfgnn/json_io.hpp"
#include "nfgnn/mlp.hpp"
#include "nfgnn/model.hpp"
#include "nfgnn/splits.hpp"
#include "nfgnn/standardize.hpp"

namespace nfgnn {

enum class Task { Binary, Category, Family, Unsupervised };
Task parse_task(const std::string& s);
std::string to_string(Task t);
bool is_supervised(Task t) noexcept;

enum class ModelKind { NfGnn, Mlp };

/// Early-stopping signal: the task metric on the validation split (weighted F1
/// or AUROC) or the negative validation loss.
enum class Criterion { Metric, Loss };

struct TrainConfig {
  ModelKind kind = ModelKind::NfGnn;
  Variant variant = Variant::Classifier;
  int num_layers = 2;
  int num_hidden = 32;
  double learning_rate = 1e-3;
  double dropout = 0.0;
  Pool pool = Pool::Mean;
  double lambda = 1e-3;  // NF-GNN one-class weight decay
  double l2 = 0.0;       // MLP weight decay
  int patience = 20;
  int max_epochs = 1000;
  std::size_t batch_size = 32;
  Criterion criterion = Criterion::Metric;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// "nfgnn-clf", "nfgnn-ae", "nfgnn-oc", "mlp", "mlp-ae", "mlp-oc".
std::string model_name(const TrainConfig& c);
/// Sets kind and variant from a model name. Throws ConfigError.
void set_model(TrainConfig& c, const std::string& name);

json to_json(const TrainConfig& c);
/// Missing keys keep their values from base. Unknown keys are rejected.
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});

/// Everything the harness needs from one data source. graphs is empty for
/// feature-table inputs; features is empty when no per-sample feature set was
/// requested.
struct ExperimentData {
  std::vector<std::string> ids;
  std::vector<std::optional<LabelTriple>> labels;
  ClassMaps class_maps;
  std::vector<FlowGraph> graphs;
  std::vector<std::string> edge_feature_names;
  Tensor features;
  std::vector<std::string> feature_names;
  FeatureSet feature_set = FeatureSet::Combined;
  int min_family_count = 9;

  std::size_t size() const noexcept { return ids.size(); }
  bool has_graphs() const noexcept { return !graphs.empty(); }
  bool has_features() const noexcept { return features.rows() > 0; }
};

struct DataOptions {
  bool graphs = true;
  bool features = false;
  FeatureSet feature_set = FeatureSet::Combined;
};

ExperimentData experiment_data(const FlowDataset& dataset, const DataOptions& opts = {}, int min_family_count = 9);
/// Graph JSON Lines file (graphs only).
ExperimentData experiment_data_from_graphs(GraphFile file);
/// Feature table with columns id, label_binary, label_category, label_family, features...
ExperimentData experiment_data_from_table(const std::filesystem::path& csv);
void write_feature_table(const std::filesystem::path& csv, const ExperimentData& data);

/// Picks the loader by extension: .json manifest, .jsonl graphs, .csv feature table.
ExperimentData load_experiment_data(const std::filesystem::path& path, const DataOptions& opts = {});

/// Per-sample class index for the task, -1 when the sample takes no part.
/// Unsupervised targets are 1 for anomalies and 0 for normal samples.
std::vector<int> task_targets(const ExperimentData& data, Task task);
std::size_t num_classes(const ExperimentData& data, Task task);

struct SplitOptions {
  double train_fraction = 0.20;  // unsupervised only
  SupervisedSplitOptions supervised;
};
SplitPlan make_split(const ExperimentData& data, Task task, std::uint64_t seed, const SplitOptions& opts = {});

/// Standardized model inputs for a subset of samples.
struct ModelInputs {
  std::vector<GraphInput> graphs;
  Tensor features;
  std::size_t size() const noexcept { return graphs.empty() ? features.rows() : graphs.size(); }
};

class TrainedModel {
 public:
  TrainedModel(TrainConfig config, Task task, std::size_t num_classes, std::size_t in_features);

  const TrainConfig& config() const noexcept { return config_; }
  Task task() const noexcept { return task_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t in_features() const noexcept { return in_features_; }
  Variant variant() const noexcept { return config_.variant; }

  Standardizer standardizer;
  SplitPlan split;
  TrainHistory history;
  FeatureSet feature_set = FeatureSet::Combined;

  NfGnnModel* gnn() noexcept { return gnn_.get(); }
  MlpModel* mlp() noexcept { return mlp_.get(); }
  ModuleStore& store();
  const ModuleStore& store() const;
  std::optional<Tensor> center() const;
  void set_center(Tensor c);

  ModelInputs inputs(const ExperimentData& data, std::span<const std::size_t> indices) const;

  /// Eval-mode class probabilities (classifier) for the given inputs.
  Tensor predict_proba(const ModelInputs& in);
  std::vector<int> predict(const ModelInputs& in);
  /// Eval-mode anomaly scores (AE/OC).
  std::vector<double> anomaly_scores(const ModelInputs& in);

  /// Weighted F1 (classifier) or AUROC (AE/OC) against the task targets.
  double metric(const ModelInputs& in, std::span<const int> targets);

 private:
  TrainConfig config_;
  Task task_;
  std::size_t num_classes_;
  std::size_t in_features_;
  std::unique_ptr<NfGnnModel> gnn_;
  std::unique_ptr<MlpModel> mlp_;
};

/// Name of the criterion metric() computes for this configuration.
std::string metric_name(const TrainConfig& c);

/// Validation criterion with the undefined-AUROC fallback: when the
/// validation targets hold a single class the negative mean anomaly score is
/// used instead.
double validation_criterion(TrainedModel& model, const ModelInputs& in, std::span<const int> targets);

/// Fits the standardizer on the training part of the split, trains with early
/// stopping and returns the best-epoch model.
std::unique_ptr<TrainedModel> train_model(const ExperimentData& data, Task task, const TrainConfig& config,
                                          const SplitPlan& split);

// Grid search ---------------------------------------------------------------

/// Axis keys in enumeration order; the last axis varies fastest.
const std::vector<std::string>& grid_keys();

struct Grid {
  std::vector<std::pair<std::string, std::vector<json>>> axes;  // canonical key order

  std::size_t size() const noexcept;
  /// Axis values of cell i as a JSON object.
  json cell(std::size_t i) const;
  TrainConfig apply(const TrainConfig& base, std::size_t i) const;
};

/// Object of key -> array of values. Throws ConfigError on unknown keys or empty axes.
Grid grid_from_json(const json& j);
json to_json(const Grid& g);
/// Default search grid for the model kind (192 cells for NF-GNN, 40 for MLP).
Grid default_grid(const TrainConfig& c);
/// Single-cell grid fixing nothing beyond the base config.
Grid unit_grid();

struct GridCell {
  std::size_t index = 0;
  json params;
  double val_criterion = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best_index = 0;
  TrainConfig best_config;
  std::unique_ptr<TrainedModel> best_model;
  double test_metric = 0.0;
};

/// Trains every cell on the same split with the base seed and keeps the
/// highest validation criterion; ties go to the earlier cell. The result does
/// not depend on the worker count.
GridResult grid_search(const ExperimentData& data, Task task, const TrainConfig& base, const Grid& grid,
                       const SplitPlan& split, unsigned workers = 1);

json to_json(const GridResult& r, Task task);

// Repeated protocol ---------------------------------------------------------

struct ProtocolOptions {
  std::size_t repeats = 30;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  SplitOptions split;
};

struct ProtocolReport {
  std::string task;
  std::string model;
  std::string metric;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  std::vector<json> selected;  // chosen grid cell per seed
  double mean = 0.0;
  double std = 0.0;
};

/// Seeds seed..seed+repeats-1, each running split -> standardize -> grid
/// search -> test metric.
ProtocolReport run_protocol(const ExperimentData& data, Task task, const TrainConfig& base, const Grid& grid,
                            const ProtocolOptions& opts);

json to_json(const ProtocolReport& r);
std::string to_csv(const ProtocolReport& r);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any call is rethrown after all threads finish.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

json history_to_json(const TrainHistory& h);
TrainHistory history_from_json(const json& j);

}  // namespace nfgnn
