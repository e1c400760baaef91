#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nfgnn/flow_ingest.hpp"
#include "nfgnn/tensor.hpp"

namespace nfgnn {

/// Directed IP-endpoint graph. Edge e runs edges[e].first -> edges[e].second
/// and owns row e of edge_features.
struct FlowGraph {
  std::string sample_id;
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  Tensor edge_features;  // m x 5d
  std::optional<LabelTriple> labels;

  std::size_t num_nodes() const noexcept { return nodes.size(); }
  std::size_t num_edges() const noexcept { return edges.size(); }

  friend bool operator==(const FlowGraph&, const FlowGraph&) = default;
};

inline constexpr std::size_t kNumAggregates = 5;
inline constexpr std::size_t kNumStructuralFeatures = 2 + 8 * kNumAggregates;

/// Column names "<feature>_<stat>" in [mean | median | std | skew | kurtosis] block order.
std::vector<std::string> aggregate_feature_names(std::span<const std::string> base_names);

/// Per-column population mean, median, std, skew and excess kurtosis, laid
/// out as five blocks of width d. Skew and kurtosis are 0 for constant columns.
/// Throws EmptyInput when flow_features has no rows.
std::vector<double> aggregate_edge_features(const Tensor& flow_features);

FlowGraph build_flow_graph(const SampleFlows& sample);

struct StructuralFeatures {
  std::vector<double> values;
  std::vector<std::string> names;
};

const std::vector<std::string>& structural_feature_names();

/// Global clustering, assortativity, then 8 local node features each
/// aggregated with the five statistics. Self-loops are ignored and edge
/// direction is dropped.
StructuralFeatures structural_features(const FlowGraph& graph);

std::vector<double> flow_aggregate_features(const SampleFlows& sample);

/// [flow aggregates | structural features].
std::vector<double> combined_features(const SampleFlows& sample);

enum class FeatureSet { Flow, Graph, Combined };
FeatureSet parse_feature_set(const std::string& s);
std::string to_string(FeatureSet f);

std::vector<std::string> feature_set_names(FeatureSet set, std::span<const std::string> flow_feature_names);
std::vector<double> sample_features(const SampleFlows& sample, FeatureSet set);

// Graph JSON Lines: {"id","labels","nodes","edges","x","feature_names"} per line.
std::string graph_to_json_line(const FlowGraph& g, std::span<const std::string> feature_names);
FlowGraph graph_from_json_line(const std::string& line, std::vector<std::string>* feature_names = nullptr);

struct GraphFile {
  std::vector<FlowGraph> graphs;
  std::vector<std::string> feature_names;
};

void write_graphs(const std::filesystem::path& path, std::span<const FlowGraph> graphs,
                  std::span<const std::string> feature_names);
GraphFile read_graphs(const std::filesystem::path& path);

}  // namespace nfgnn
