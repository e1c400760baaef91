#include "nfgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"
#include "nfgnn/rng.hpp"

namespace nfgnn {

SynthSpec synth_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  SynthSpec s;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "num_classes") s.num_classes = v.get<std::size_t>();
      else if (k == "samples_per_class") s.samples_per_class = v.get<std::size_t>();
      else if (k == "num_samples") s.num_samples = v.get<std::size_t>();
      else if (k == "anomaly_rate") s.anomaly_rate = v.is_null() ? -1.0 : v.get<double>();
      else if (k == "delta") s.delta = v.get<double>();
      else if (k == "dim") s.dim = v.get<std::size_t>();
      else if (k == "constant_columns") s.constant_columns = v.get<std::size_t>();
      else if (k == "min_nodes") s.min_nodes = v.get<std::size_t>();
      else if (k == "max_nodes") s.max_nodes = v.get<std::size_t>();
      else if (k == "max_flows_per_edge") s.max_flows_per_edge = v.get<std::size_t>();
      else if (k == "structure_shift") s.structure_shift = v.get<double>();
      else throw ConfigError(fmt::format("unknown synth key '{}'", k));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad synth spec: ") + e.what());
  }
  return s;
}

json to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"samples_per_class", s.samples_per_class},
          {"num_samples", s.num_samples},
          {"anomaly_rate", s.anomaly_mode() ? json(s.anomaly_rate) : json(nullptr)},
          {"delta", s.delta},
          {"dim", s.dim},
          {"constant_columns", s.constant_columns},
          {"min_nodes", s.min_nodes},
          {"max_nodes", s.max_nodes},
          {"max_flows_per_edge", s.max_flows_per_edge},
          {"structure_shift", s.structure_shift}};
}

namespace {

void check(const SynthSpec& s) {
  if (s.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (s.dim < 1) throw ConfigError("dim must be >= 1");
  if (s.min_nodes < 2 || s.max_nodes < s.min_nodes) throw ConfigError("need 2 <= min_nodes <= max_nodes");
  if (s.max_flows_per_edge < 1) throw ConfigError("max_flows_per_edge must be >= 1");
  if (!std::isfinite(s.delta) || s.delta < 0.0) throw ConfigError("delta must be finite and non-negative");
  if (s.structure_shift < 0.0) throw ConfigError("structure_shift must be non-negative");
  if (s.anomaly_mode() && s.anomaly_rate > 1.0) throw ConfigError("anomaly_rate must be in [0, 1]");
  if (s.total_samples() == 0) throw ConfigError("synth spec produces no samples");
}

std::string ip(std::size_t i) { return fmt::format("10.0.{}.{}", i / 256, i % 256); }

std::vector<std::pair<std::size_t, std::size_t>> topology(const SynthSpec& s, std::size_t cls, Rng& rng) {
  const auto n = std::uniform_int_distribution<std::size_t>(s.min_nodes, s.max_nodes)(rng);
  const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (kind == 0) {
    const auto extra = static_cast<std::size_t>(std::llround(s.structure_shift * static_cast<double>(cls)));
    const std::size_t hubs = std::min(n - 1, 1 + extra);
    for (std::size_t j = hubs; j < n; ++j) pairs.emplace_back(j % hubs, j);
  } else if (kind == 1) {
    for (std::size_t j = 0; j + 1 < n; ++j) pairs.emplace_back(j, j + 1);
  } else {
    const std::size_t q = std::min<std::size_t>(n, 4);
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = a + 1; b < q; ++b) pairs.emplace_back(a, b);
    }
    for (std::size_t j = q; j < n; ++j) pairs.emplace_back(j - 1, j);
  }
  std::bernoulli_distribution flip(0.5);
  for (auto& p : pairs) {
    if (flip(rng)) std::swap(p.first, p.second);
  }
  return pairs;
}

SampleFlows make_sample(const SynthSpec& s, std::size_t cls, std::size_t index, Rng& rng) {
  SampleFlows out;
  out.sample_id = fmt::format("s{:06d}", index);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> nflows(1, s.max_flows_per_edge);
  std::bernoulli_distribution reverse(0.2);
  auto flow = [&](std::size_t a, std::size_t b) {
    FlowRecord f;
    f.src_ip = ip(a);
    f.dst_ip = ip(b);
    for (std::size_t j = 0; j < s.dim; ++j) {
      const double mu = j % s.num_classes == cls ? s.delta : 0.0;
      f.features.push_back(mu + noise(rng));
    }
    for (std::size_t j = 0; j < s.constant_columns; ++j) f.features.push_back(1.0);
    out.flows.push_back(std::move(f));
  };
  for (const auto& [a, b] : topology(s, cls, rng)) {
    const std::size_t k = nflows(rng);
    for (std::size_t r = 0; r < k; ++r) flow(a, b);
    if (reverse(rng)) flow(b, a);
  }
  return out;
}

}  // namespace

FlowDataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  check(spec);
  Rng rng(seed);
  FlowDataset ds;
  for (std::size_t j = 0; j < spec.dim; ++j) ds.feature_names.push_back(fmt::format("f{}", j));
  for (std::size_t j = 0; j < spec.constant_columns; ++j) ds.feature_names.push_back(fmt::format("const{}", j));

  // Class index per sample in emission order.
  std::vector<std::size_t> cls;
  if (spec.anomaly_mode()) {
    const auto anomalies = static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(spec.num_samples)));
    cls.assign(spec.num_samples, 0);
    std::fill(cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(anomalies), 1);
    std::shuffle(cls.begin(), cls.end(), rng);
    ds.class_maps.binary.names = {"benign", "malicious"};
    ds.class_maps.category.names = {"benign", "malicious"};
  } else {
    for (std::size_t c = 0; c < spec.num_classes; ++c) cls.insert(cls.end(), spec.samples_per_class, c);
    ds.class_maps.binary.names = {"benign", "malicious"};
    std::set<std::string> cats, fams;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      cats.insert(fmt::format("class{}", c));
      fams.insert(fmt::format("family{}", c));
    }
    ds.class_maps.category.names.assign(cats.begin(), cats.end());
    ds.class_maps.family.names.assign(fams.begin(), fams.end());
  }

  for (std::size_t i = 0; i < cls.size(); ++i) {
    SampleFlows s = make_sample(spec, cls[i], i, rng);
    LabelTriple t;
    t.binary = cls[i] == 0 ? 0 : 1;
    if (spec.anomaly_mode()) {
      t.category = t.binary;
    } else {
      t.category = *ds.class_maps.category.index_of(fmt::format("class{}", cls[i]));
      t.family = *ds.class_maps.family.index_of(fmt::format("family{}", cls[i]));
    }
    s.labels = t;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace nfgnn
