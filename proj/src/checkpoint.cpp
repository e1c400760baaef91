#include "nfgnn/checkpoint.hpp"

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

namespace {

constexpr const char* kFormat = "nfgnn-checkpoint";
constexpr int kVersion = 1;

json tensor_json(const std::string& name, const Tensor& t) {
  return {{"name", name}, {"shape", {t.rows(), t.cols()}}, {"values", t.values()}};
}

Tensor tensor_from(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw ConfigError("tensor shape must have two entries");
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != shape[0] * shape[1]) throw ConfigError("tensor value count does not match its shape");
  return Tensor(shape[0], shape[1], std::move(values));
}

json split_json(const SplitPlan& p) {
  return {{"seed", p.seed}, {"label_level", to_string(p.label_level)}, {"train", p.train}, {"val", p.val}, {"test", p.test}};
}

SplitPlan split_from(const json& j) {
  SplitPlan p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.label_level = parse_label_level(j.at("label_level").get<std::string>());
  p.train = j.at("train").get<std::vector<std::size_t>>();
  p.val = j.at("val").get<std::vector<std::size_t>>();
  p.test = j.at("test").get<std::vector<std::size_t>>();
  return p;
}

}  // namespace

json checkpoint_to_json(const TrainedModel& model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = to_json(model.config());
  j["variant"] = to_string(model.variant());
  j["pool"] = to_string(model.config().pool);
  j["num_layers"] = model.config().num_layers;
  j["task"] = to_string(model.task());
  j["num_classes"] = model.num_classes();
  j["in_features"] = model.in_features();
  j["feature_set"] = to_string(model.feature_set);
  j["standardizer"] = {{"kept_columns", model.standardizer.kept_columns},
                       {"mean", model.standardizer.mean},
                       {"std", model.standardizer.std}};
  j["split"] = split_json(model.split);
  json params = json::array();
  for (const Parameter* p : model.store().params().all()) params.push_back(tensor_json(p->name, p->value));
  j["params"] = params;
  json bns = json::array();
  for (const BatchNormState* b : model.store().batch_norms()) {
    bns.push_back({{"name", b->name}, {"running_mean", b->running_mean}, {"running_var", b->running_var}});
  }
  j["batch_norm"] = bns;
  const auto c = model.center();
  j["oc_center"] = c ? json(c->values()) : json(nullptr);
  j["history"] = history_to_json(model.history);
  return j;
}

std::unique_ptr<TrainedModel> checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != kFormat) throw ConfigError("not a checkpoint file");
    if (j.at("version").get<int>() != kVersion) {
      throw ConfigError(fmt::format("unsupported checkpoint version {}", j.at("version").get<int>()));
    }
    const TrainConfig cfg = train_config_from_json(j.at("config"));
    auto m = std::make_unique<TrainedModel>(cfg, parse_task(j.at("task").get<std::string>()),
                                            j.at("num_classes").get<std::size_t>(), j.at("in_features").get<std::size_t>());
    m->feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
    const json& st = j.at("standardizer");
    m->standardizer.kept_columns = st.at("kept_columns").get<std::vector<std::size_t>>();
    m->standardizer.mean = st.at("mean").get<std::vector<double>>();
    m->standardizer.std = st.at("std").get<std::vector<double>>();
    if (m->standardizer.kept_columns.size() != m->in_features() || m->standardizer.mean.size() != m->in_features() ||
        m->standardizer.std.size() != m->in_features()) {
      throw ConfigError("standardizer width does not match in_features");
    }
    m->split = split_from(j.at("split"));

    ModuleStore& store = m->store();
    const auto& params = j.at("params");
    if (params.size() != store.params().size()) {
      throw ConfigError(fmt::format("checkpoint holds {} parameters, model has {}", params.size(), store.params().size()));
    }
    for (const auto& pj : params) {
      const auto name = pj.at("name").get<std::string>();
      Parameter* p = store.params().find(name);
      if (!p) throw ConfigError("unknown parameter '" + name + "'");
      Tensor t = tensor_from(pj);
      if (!t.same_shape(p->value)) throw ConfigError("parameter '" + name + "' has the wrong shape");
      p->value = std::move(t);
    }
    const auto bns = store.batch_norms();
    const auto& bj = j.at("batch_norm");
    if (bj.size() != bns.size()) throw ConfigError("batch-norm layer count does not match the model");
    for (std::size_t k = 0; k < bns.size(); ++k) {
      if (bj[k].at("name").get<std::string>() != bns[k]->name) throw ConfigError("batch-norm layer order mismatch");
      auto mean = bj[k].at("running_mean").get<std::vector<double>>();
      auto var = bj[k].at("running_var").get<std::vector<double>>();
      if (mean.size() != bns[k]->running_mean.size() || var.size() != bns[k]->running_var.size()) {
        throw ConfigError("batch-norm statistics have the wrong width");
      }
      bns[k]->running_mean = std::move(mean);
      bns[k]->running_var = std::move(var);
    }
    if (!j.at("oc_center").is_null()) {
      auto c = j.at("oc_center").get<std::vector<double>>();
      const std::size_t w = c.size();
      m->set_center(Tensor(1, w, std::move(c)));
    }
    m->history = history_from_json(j.at("history"));
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
  write_text_file(path, dump_json(checkpoint_to_json(model)) + "\n");
}

std::unique_ptr<TrainedModel> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  return checkpoint_from_json(read_json_file(path));
}

}  // namespace nfgnn
