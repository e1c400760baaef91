#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <map>

#include "nfgnn/checkpoint.hpp"
#include "nfgnn/errors.hpp"
#include "nfgnn/experiment.hpp"
#include "nfgnn/metrics.hpp"
#include "nfgnn/standardize.hpp"
#include "nfgnn/synth.hpp"
#include "support.hpp"

namespace nfgnn {
namespace {

// --- splits -------------------------------------------------------------------

std::vector<int> classes(std::vector<std::size_t> counts) {
  std::vector<int> out;
  for (std::size_t c = 0; c < counts.size(); ++c) out.insert(out.end(), counts[c], static_cast<int>(c));
  return out;
}

std::map<int, std::size_t> count_by_class(const std::vector<int>& cls, const std::vector<std::size_t>& idx) {
  std::map<int, std::size_t> m;
  for (std::size_t i : idx) ++m[cls[i]];
  return m;
}

TEST(SupervisedSplit, BinaryQuotaArithmetic) {
  const auto cls = classes({300, 300});
  const SplitPlan p = supervised_split(cls, LabelLevel::Binary, 1);
  EXPECT_EQ(p.train.size(), 200u);
  EXPECT_EQ(p.val.size(), 20u);
  EXPECT_EQ(p.test.size(), 380u);
  EXPECT_EQ(count_by_class(cls, p.train), (std::map<int, std::size_t>{{0, 100}, {1, 100}}));
  EXPECT_EQ(count_by_class(cls, p.val), (std::map<int, std::size_t>{{0, 10}, {1, 10}}));
}

TEST(SupervisedSplit, LevelDefaults) {
  EXPECT_EQ(default_quota(LabelLevel::Binary), 100u);
  EXPECT_EQ(default_quota(LabelLevel::Category), 25u);
  EXPECT_EQ(default_quota(LabelLevel::Family), 5u);
  EXPECT_DOUBLE_EQ(default_val_fraction(LabelLevel::Binary), 0.05);
  EXPECT_DOUBLE_EQ(default_val_fraction(LabelLevel::Category), 0.05);
  EXPECT_DOUBLE_EQ(default_val_fraction(LabelLevel::Family), 0.20);
  const auto cls = classes({15, 25, 10});
  const SplitPlan p = supervised_split(cls, LabelLevel::Family, 3);
  EXPECT_EQ(p.train.size(), 15u);
  EXPECT_EQ(p.val.size(), 7u);  // 20% of 35
  EXPECT_EQ(p.test.size(), 28u);
}

TEST(SupervisedSplit, ClassBelowQuota) {
  const auto cls = classes({4, 20});
  EXPECT_THROW(supervised_split(cls, LabelLevel::Family, 0), InsufficientClassSize);
}

TEST(SupervisedSplit, ExcludedSamplesAndDeterminism) {
  auto cls = classes({140, 140});
  cls[0] = cls[5] = -1;
  const SplitPlan a = supervised_split(cls, LabelLevel::Binary, 9);
  EXPECT_EQ(a, supervised_split(cls, LabelLevel::Binary, 9));
  EXPECT_NE(a, supervised_split(cls, LabelLevel::Binary, 10));
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.val.begin(), a.val.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all.size(), 278u);
  EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
  EXPECT_FALSE(std::binary_search(all.begin(), all.end(), 0u));
}

TEST(UnsupervisedSplit, FractionArithmetic) {
  const auto cls = classes({950, 50});
  const SplitPlan p = unsupervised_split(cls, 4);
  EXPECT_EQ(p.train.size(), 200u);
  EXPECT_EQ(p.val.size(), 80u);
  EXPECT_EQ(p.test.size(), 720u);
  for (const auto* part : {&p.train, &p.val, &p.test}) {
    const double expect = 0.05 * static_cast<double>(part->size());
    EXPECT_LE(std::abs(static_cast<double>(count_by_class(cls, *part)[1]) - expect), 1.0);
  }
  EXPECT_EQ(unsupervised_split(cls, 4, 0.01).train.size(), 10u);
  EXPECT_THROW(unsupervised_split(cls, 4, 0.0), ConfigError);
}

TEST(Apportion, LargestRemainder) {
  const std::vector<std::size_t> sizes = {5, 5, 5};
  const auto a = apportion(sizes, 0.2);
  EXPECT_EQ(a, (std::vector<std::size_t>{1, 1, 1}));
  const std::vector<std::size_t> odd = {3, 3};
  EXPECT_EQ(apportion(odd, 0.5), (std::vector<std::size_t>{2, 1}));
}

// --- standardization ----------------------------------------------------------

TEST(Standardize, PopulationMoments) {
  const Tensor train = Tensor::from_rows({{1.0}, {3.0}});
  const Standardizer s = standardize_fit(train);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.std[0], 1.0);
  EXPECT_EQ(standardize_apply(s, train), Tensor::from_rows({{-1.0}, {1.0}}));
  EXPECT_EQ(standardize_apply(s, Tensor::from_rows({{11.0}})), Tensor::from_rows({{9.0}}));
}

TEST(Standardize, ConstantColumnsRemoved) {
  const Tensor x = Tensor::from_rows({{3.0, 1.0, 5.0}, {3.0, 1.0 + 1e-15, 6.0}, {3.0, 1.0, 9.0}});
  EXPECT_EQ(non_constant_columns(x), (std::vector<std::size_t>{2}));
  const auto sel = remove_constant_columns(x, x);
  EXPECT_EQ(sel.kept_columns, (std::vector<std::size_t>{2}));
  EXPECT_EQ(sel.matrix.cols(), 1u);
  const Standardizer s = standardize_fit(x);
  EXPECT_EQ(s.output_width(), 1u);
}

TEST(Standardize, TrainingRowsHaveZeroMean) {
  Rng rng(5);
  Tensor x = testing::random_matrix(37, 6, rng);
  for (auto& v : x.data()) v = 3.0 * v + 10.0;
  const Tensor z = standardize_apply(standardize_fit(x), x);
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) m += z(i, j);
    EXPECT_NEAR(m / 37.0, 0.0, 1e-12);
  }
}

// --- early stopping -----------------------------------------------------------

struct Scripted {
  std::vector<double> criteria;  // by epoch, repeats the last value when exhausted
  int state = 0;
  int saved = -1;

  TrainHooks hooks() {
    TrainHooks h;
    h.run_epoch = [this](int epoch) {
      state = epoch;
      return 1.0 / epoch;
    };
    h.validate = [this] { return criteria[std::min<std::size_t>(state - 1, criteria.size() - 1)]; };
    h.save_best = [this] { saved = state; };
    h.restore_best = [this] { state = saved; };
    return h;
  }
};

TEST(EarlyStopping, FlatCriterionStopsAt21) {
  Scripted s{{0.5}};
  const TrainHistory h = run_early_stopping({20, 1000}, s.hooks());
  EXPECT_EQ(h.epochs.size(), 21u);
  EXPECT_EQ(h.epochs.back().epoch, 21);
  EXPECT_EQ(h.best_epoch, 1);
  EXPECT_TRUE(h.stopped_early);
  EXPECT_EQ(s.state, 1);
}

TEST(EarlyStopping, ImprovingRunReachesMaxEpochs) {
  Scripted s;
  for (int i = 1; i <= 60; ++i) s.criteria.push_back(i);
  const TrainHistory h = run_early_stopping({20, 60}, s.hooks());
  EXPECT_EQ(h.epochs.size(), 60u);
  EXPECT_EQ(h.best_epoch, 60);
  EXPECT_FALSE(h.stopped_early);
  EXPECT_EQ(s.state, 60);
}

TEST(EarlyStopping, RestoresBestEpoch) {
  Scripted s{{0.1, 0.5, 0.3, 0.5, 0.2}};
  const TrainHistory h = run_early_stopping({3, 100}, s.hooks());
  EXPECT_EQ(h.best_epoch, 2);
  EXPECT_EQ(h.best_criterion, 0.5);
  EXPECT_EQ(h.epochs.size(), 5u);
  EXPECT_EQ(s.state, 2);
  EXPECT_EQ(h.epochs[3].best_criterion, 0.5);
  EXPECT_DOUBLE_EQ(h.epochs[1].train_loss, 0.5);
}

TEST(EarlyStopping, NumericalErrorNamesEpoch) {
  TrainHooks h;
  h.run_epoch = [](int epoch) -> double {
    if (epoch == 3) throw NumericalError("nan");
    return 0.0;
  };
  h.validate = [] { return 0.0; };
  h.save_best = [] {};
  h.restore_best = [] {};
  try {
    run_early_stopping({}, h);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 3"), std::string::npos);
  }
}

// --- synthetic data -------------------------------------------------------------

TEST(Synth, DeterministicAndSized) {
  SynthSpec s;
  s.samples_per_class = 20;
  EXPECT_EQ(synth_generate(s, 5), synth_generate(s, 5));
  EXPECT_NE(synth_generate(s, 5), synth_generate(s, 6));
  EXPECT_EQ(synth_generate(s, 5).samples.size(), 40u);
  s.anomaly_rate = 0.05;
  s.num_samples = 200;
  const FlowDataset a = synth_generate(s, 1);
  ASSERT_EQ(a.samples.size(), 200u);
  EXPECT_EQ(std::count_if(a.samples.begin(), a.samples.end(), [](const auto& x) { return x.labels->binary == 1; }), 10);
}

TEST(Synth, CategoryLabelsForFiveClasses) {
  SynthSpec s;
  s.num_classes = 5;
  s.samples_per_class = 3;
  const FlowDataset d = synth_generate(s, 0);
  EXPECT_EQ(d.class_maps.category.names,
            (std::vector<std::string>{"class0", "class1", "class2", "class3", "class4"}));
  EXPECT_EQ(d.class_maps.binary.size(), 2u);
  EXPECT_EQ(d.samples.size(), 15u);
}

TEST(Synth, RejectsBadSpec) {
  EXPECT_THROW(synth_spec_from_json(json{{"colour", 1}}), ConfigError);
  SynthSpec s;
  s.num_classes = 1;
  EXPECT_THROW(synth_generate(s, 0), ConfigError);
}

// Nearest-centroid accuracy on flow aggregate features; centroids fit on the
// even samples and scored on the odd ones.
double nearest_centroid_accuracy(const FlowDataset& d) {
  std::map<int, std::vector<double>> sum;
  std::map<int, int> count;
  std::vector<std::vector<double>> feats;
  for (const auto& s : d.samples) feats.push_back(flow_aggregate_features(s));
  for (std::size_t i = 0; i < feats.size(); i += 2) {
    auto& acc = sum[d.samples[i].labels->category];
    acc.resize(feats[i].size(), 0.0);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += feats[i][j];
    ++count[d.samples[i].labels->category];
  }
  int correct = 0, total = 0;
  for (std::size_t i = 1; i < feats.size(); i += 2) {
    int best = -1;
    double best_d = 0.0;
    for (const auto& [c, acc] : sum) {
      double dist = 0.0;
      for (std::size_t j = 0; j < acc.size(); ++j) {
        const double diff = feats[i][j] - acc[j] / count[c];
        dist += diff * diff;
      }
      if (best < 0 || dist < best_d) {
        best = c;
        best_d = dist;
      }
    }
    correct += best == d.samples[i].labels->category;
    ++total;
  }
  return static_cast<double>(correct) / total;
}

TEST(Synth, SeparableAtDeltaFour) {
  SynthSpec s;
  EXPECT_GE(nearest_centroid_accuracy(synth_generate(s, 3)), 0.99);
}

TEST(Synth, IndistinguishableAtDeltaZero) {
  SynthSpec s;
  s.delta = 0.0;
  const double acc = nearest_centroid_accuracy(synth_generate(s, 3));
  EXPECT_GT(acc, 0.4);
  EXPECT_LT(acc, 0.6);
}

// --- experiment harness ---------------------------------------------------------

ExperimentData small_data(std::size_t per_class, std::uint64_t seed, bool features = false) {
  SynthSpec s;
  s.samples_per_class = per_class;
  s.max_nodes = 6;
  DataOptions o;
  o.graphs = !features;
  o.features = features;
  o.feature_set = FeatureSet::Flow;
  return experiment_data(synth_generate(s, seed), o);
}

ExperimentData small_anomaly_data(std::size_t n, std::uint64_t seed) {
  SynthSpec s;
  s.anomaly_rate = 0.1;
  s.num_samples = n;
  s.max_nodes = 6;
  return experiment_data(synth_generate(s, seed));
}

TrainConfig quick(const std::string& model) {
  TrainConfig c;
  set_model(c, model);
  c.num_hidden = 8;
  c.max_epochs = 6;
  c.patience = 3;
  return c;
}

TEST(Tasks, TargetsAndFamilyFilter) {
  ExperimentData d;
  d.ids = {"a", "b", "c", "d"};
  d.class_maps.binary.names = {"benign", "malicious"};
  d.class_maps.family.names = {"f0", "f1"};
  d.labels = {LabelTriple{0, 0, std::nullopt}, LabelTriple{1, 1, 0}, LabelTriple{1, 1, 0}, LabelTriple{1, 1, 1}};
  d.min_family_count = 2;
  EXPECT_EQ(task_targets(d, Task::Family), (std::vector<int>{-1, 0, 0, -1}));
  EXPECT_EQ(task_targets(d, Task::Unsupervised), (std::vector<int>{0, 1, 1, 1}));
  d.class_maps.binary.names = {"attack", "normal"};
  EXPECT_EQ(task_targets(d, Task::Unsupervised), (std::vector<int>{1, 0, 0, 0}));
  EXPECT_EQ(num_classes(d, Task::Family), 2u);
  EXPECT_THROW(parse_task("ranking"), ConfigError);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  TrainConfig c = quick("nfgnn-oc");
  c.pool = Pool::Max;
  c.criterion = Criterion::Loss;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);
  EXPECT_THROW(train_config_from_json(json{{"num_hiden", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"model", "nfgnn-xyz"}}), ConfigError);
  EXPECT_EQ(model_name(c), "nfgnn-oc");
}

TEST(Grid, DefaultSizes) {
  EXPECT_EQ(default_grid(quick("nfgnn-clf")).size(), 192u);
  EXPECT_EQ(default_grid(quick("mlp")).size(), 40u);
  EXPECT_EQ(unit_grid().size(), 1u);
}

TEST(Grid, LastAxisVariesFastest) {
  const Grid g = grid_from_json(json{{"dropout", {0.0, 0.5}}, {"num_layers", {1, 2}}});
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.cell(0), (json{{"num_layers", 1}, {"dropout", 0.0}}));
  EXPECT_EQ(g.cell(1), (json{{"num_layers", 1}, {"dropout", 0.5}}));
  EXPECT_EQ(g.apply(quick("nfgnn-clf"), 2).num_layers, 2);
  EXPECT_THROW(grid_from_json(json{{"epochs", {1}}}), ConfigError);
  EXPECT_THROW(grid_from_json(json{{"dropout", json::array()}}), ConfigError);
}

TEST(GridSearch, TiesGoToTheEarlierCell) {
  const ExperimentData d = small_data(40, 1);
  SplitOptions o;
  o.supervised.quota = 10;
  const SplitPlan split = make_split(d, Task::Binary, 0, o);
  const Grid g = grid_from_json(json{{"num_hidden", {8, 8}}});
  const GridResult r = grid_search(d, Task::Binary, quick("nfgnn-clf"), g, split, 2);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_EQ(r.cells[0].val_criterion, r.cells[1].val_criterion);
  EXPECT_EQ(r.best_index, 0u);
}

TEST(GridSearch, UnitGridEqualsTrain) {
  const ExperimentData d = small_data(40, 2);
  SplitOptions o;
  o.supervised.quota = 10;
  const SplitPlan split = make_split(d, Task::Binary, 3, o);
  TrainConfig c = quick("nfgnn-clf");
  c.seed = 3;
  const auto trained = train_model(d, Task::Binary, c, split);
  const GridResult r = grid_search(d, Task::Binary, c, unit_grid(), split, 1);
  EXPECT_EQ(dump_json(checkpoint_to_json(*trained)), dump_json(checkpoint_to_json(*r.best_model)));
  EXPECT_EQ(r.best_config, c);
}

TEST(Train, SeededRunsAreIdentical) {
  const ExperimentData d = small_anomaly_data(120, 4);
  const SplitPlan split = make_split(d, Task::Unsupervised, 1);
  TrainConfig c = quick("nfgnn-ae");
  c.dropout = 0.2;
  c.seed = 1;
  const auto a = train_model(d, Task::Unsupervised, c, split);
  const auto b = train_model(d, Task::Unsupervised, c, split);
  EXPECT_EQ(dump_json(history_to_json(a->history)), dump_json(history_to_json(b->history)));
  EXPECT_EQ(dump_json(checkpoint_to_json(*a)), dump_json(checkpoint_to_json(*b)));
  for (const auto& e : a->history.epochs) EXPECT_TRUE(std::isfinite(e.train_loss));
}

TEST(Train, AnomaliesScoreHigherAfterTraining) {
  const ExperimentData d = small_anomaly_data(200, 5);
  const SplitPlan split = make_split(d, Task::Unsupervised, 2);
  TrainConfig c = quick("nfgnn-oc");
  c.max_epochs = 30;
  c.patience = 10;
  auto m = train_model(d, Task::Unsupervised, c, split);
  const auto targets = task_targets(d, Task::Unsupervised);
  const auto scores = m->anomaly_scores(m->inputs(d, split.test));
  double pos = 0.0, neg = 0.0;
  int np = 0, nn = 0;
  for (std::size_t k = 0; k < split.test.size(); ++k) {
    if (targets[split.test[k]] == 1) {
      pos += scores[k];
      ++np;
    } else {
      neg += scores[k];
      ++nn;
    }
  }
  EXPECT_GT(pos / np, neg / nn);
}

TEST(Train, MlpSeparatesDeltaFourFlowFeatures) {
  const ExperimentData d = small_data(300, 6, true);
  const SplitPlan split = make_split(d, Task::Binary, 0);
  TrainConfig c;
  set_model(c, "mlp");
  c.criterion = Criterion::Loss;
  auto m = train_model(d, Task::Binary, c, split);
  const auto targets = task_targets(d, Task::Binary);
  std::vector<int> y;
  for (std::size_t i : split.test) y.push_back(targets[i]);
  EXPECT_GE(m->metric(m->inputs(d, split.test), y), 0.95);
}

TEST(Train, MlpAutoencoderBestCriterionIsMonotone) {
  SynthSpec s;
  s.anomaly_rate = 0.1;
  s.num_samples = 150;
  DataOptions o{false, true, FeatureSet::Flow};
  const ExperimentData d = experiment_data(synth_generate(s, 7), o);
  const SplitPlan split = make_split(d, Task::Unsupervised, 0);
  TrainConfig c = quick("mlp-ae");
  c.max_epochs = 15;
  auto m = train_model(d, Task::Unsupervised, c, split);
  for (std::size_t k = 1; k < m->history.epochs.size(); ++k) {
    EXPECT_GE(m->history.epochs[k].best_criterion, m->history.epochs[k - 1].best_criterion);
  }
}

TEST(Validation, SingleClassFallsBackToMeanScore) {
  const ExperimentData d = small_anomaly_data(60, 8);
  const SplitPlan split = make_split(d, Task::Unsupervised, 0);
  TrainConfig c = quick("nfgnn-ae");
  c.max_epochs = 1;
  auto m = train_model(d, Task::Unsupervised, c, split);
  std::vector<std::size_t> normal;
  const auto targets = task_targets(d, Task::Unsupervised);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (targets[i] == 0) normal.push_back(i);
  }
  const ModelInputs in = m->inputs(d, normal);
  const std::vector<int> zeros(normal.size(), 0);
  const auto scores = m->anomaly_scores(in);
  double mean = 0.0;
  for (double v : scores) mean += v;
  mean /= static_cast<double>(scores.size());
  EXPECT_NEAR(validation_criterion(*m, in, zeros), -mean, 1e-12);
}

TEST(Protocol, SingleRepeatHasZeroStd) {
  const ExperimentData d = small_data(40, 9);
  ProtocolOptions po;
  po.repeats = 1;
  po.split.supervised.quota = 10;
  const ProtocolReport r = run_protocol(d, Task::Binary, quick("nfgnn-clf"), unit_grid(), po);
  ASSERT_EQ(r.per_seed.size(), 1u);
  EXPECT_EQ(r.std, 0.0);
  EXPECT_EQ(r.metric, "weighted_f1");
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task,model,metric,seed,value");
  const json j = to_json(r);
  for (const char* key : {"task", "model", "mean", "std", "per_seed"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Protocol, WorkerCountDoesNotChangeResults) {
  const ExperimentData d = small_data(40, 10);
  ProtocolOptions po;
  po.repeats = 3;
  po.split.supervised.quota = 10;
  const Grid g = grid_from_json(json{{"num_hidden", {4, 8}}});
  po.workers = 1;
  const json a = to_json(run_protocol(d, Task::Binary, quick("nfgnn-clf"), g, po));
  po.workers = 3;
  const json b = to_json(run_protocol(d, Task::Binary, quick("nfgnn-clf"), g, po));
  EXPECT_EQ(dump_json(a), dump_json(b));
}

TEST(ParallelFor, RethrowsLowestIndexError) {
  std::atomic<int> ran{0};
  try {
    parallel_for(8, 4, [&](std::size_t i) {
      ++ran;
      if (i == 5 || i == 2) throw std::runtime_error("task " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "task 2");
  }
  EXPECT_EQ(ran.load(), 8);
}

// --- checkpoints ----------------------------------------------------------------

void expect_checkpoint_round_trip(const TrainedModel& m) {
  const std::string text = dump_json(checkpoint_to_json(m));
  const auto back = checkpoint_from_json(json::parse(text));
  EXPECT_EQ(dump_json(checkpoint_to_json(*back)), text);
}

TEST(Checkpoint, RoundTripsEveryModelKind) {
  const ExperimentData graphs = small_anomaly_data(80, 11);
  SynthSpec s;
  s.anomaly_rate = 0.1;
  s.num_samples = 80;
  const ExperimentData feats = experiment_data(synth_generate(s, 11), DataOptions{false, true, FeatureSet::Combined});
  for (const char* name : {"nfgnn-ae", "nfgnn-oc", "mlp-ae", "mlp-oc"}) {
    TrainConfig c = quick(name);
    c.max_epochs = 2;
    const ExperimentData& d = c.kind == ModelKind::Mlp ? feats : graphs;
    auto m = train_model(d, Task::Unsupervised, c, make_split(d, Task::Unsupervised, 0));
    SCOPED_TRACE(name);
    expect_checkpoint_round_trip(*m);
    auto back = checkpoint_from_json(checkpoint_to_json(*m));
    const ModelInputs in = m->inputs(d, m->split.test);
    EXPECT_EQ(back->anomaly_scores(back->inputs(d, m->split.test)), m->anomaly_scores(in));
  }
  const ExperimentData sup = small_data(30, 12);
  SplitOptions o;
  o.supervised.quota = 10;
  TrainConfig c = quick("nfgnn-clf");
  c.max_epochs = 2;
  auto m = train_model(sup, Task::Binary, c, make_split(sup, Task::Binary, 0, o));
  expect_checkpoint_round_trip(*m);
}

TEST(Checkpoint, RejectsForeignOrDamagedFiles) {
  EXPECT_THROW(checkpoint_from_json(json{{"format", "other"}}), ConfigError);
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint.json"), ConfigError);
  const ExperimentData d = small_anomaly_data(40, 13);
  TrainConfig c = quick("nfgnn-oc");
  c.max_epochs = 1;
  auto m = train_model(d, Task::Unsupervised, c, make_split(d, Task::Unsupervised, 0));
  json j = checkpoint_to_json(*m);
  j["params"][0]["values"].erase(0);
  EXPECT_THROW(checkpoint_from_json(j), ConfigError);
}

TEST(TrainedModel, RejectsMismatchedConfig) {
  TrainConfig c = quick("nfgnn-oc");
  EXPECT_THROW(TrainedModel(c, Task::Binary, 2, 4), ConfigError);
  EXPECT_THROW(TrainedModel(quick("nfgnn-clf"), Task::Binary, 2, 0), ConfigError);
}

}  // namespace
}  // namespace nfgnn
