#pragma once

#include <cstdint>

#include "nfgnn/flow_ingest.hpp"
#include "nfgnn/json_io.hpp"

namespace nfgnn {

/// Random flow samples with a controlled class separation. Class c draws its
/// flow features from N(mu_c, I) with mu_c[j] = delta when j % k == c and 0
/// otherwise, so the per-feature means of two classes differ by delta.
///
/// Classes mode (anomaly_rate < 0): num_classes x samples_per_class samples,
/// category "class<c>", family "family<c>", binary benign for class 0 and
/// malicious otherwise.
/// Anomaly mode (anomaly_rate >= 0): num_samples samples of which
/// round(anomaly_rate * num_samples) use the class 1 distribution and are
/// labelled malicious; the rest are benign.
struct SynthSpec {
  std::size_t num_classes = 2;
  std::size_t samples_per_class = 200;
  std::size_t num_samples = 1000;
  double anomaly_rate = -1.0;
  double delta = 4.0;
  std::size_t dim = 4;
  std::size_t constant_columns = 1;
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 10;
  std::size_t max_flows_per_edge = 3;
  // Extra star hubs per class index. 0 keeps the topology distribution the
  // same for every class.
  double structure_shift = 0.0;

  bool anomaly_mode() const noexcept { return anomaly_rate >= 0.0; }
  std::size_t total_samples() const noexcept { return anomaly_mode() ? num_samples : num_classes * samples_per_class; }
};

SynthSpec synth_spec_from_json(const json& j);
json to_json(const SynthSpec& s);

FlowDataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace nfgnn
