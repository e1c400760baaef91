#include "nfgnn/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"
#include "nfgnn/json_io.hpp"

namespace nfgnn {

namespace {

constexpr const char* kStatNames[kNumAggregates] = {"mean", "median", "std", "skew", "kurtosis"};

struct Moments {
  double mean, median, std, skew, kurtosis;
};

Moments moments(std::vector<double> xs) {
  const std::size_t k = xs.size();
  const double kd = static_cast<double>(k);
  double sum = 0.0;
  for (double v : xs) sum += v;
  const double mean = sum / kd;
  std::sort(xs.begin(), xs.end());
  const double median = k % 2 == 1 ? xs[k / 2] : 0.5 * (xs[k / 2 - 1] + xs[k / 2]);
  if (xs.front() == xs.back()) return {xs.front(), xs.front(), 0.0, 0.0, 0.0};
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : xs) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= kd;
  m3 /= kd;
  m4 /= kd;
  const double sd = std::sqrt(m2);
  return {mean, median, sd, m3 / (m2 * sd), m4 / (m2 * m2) - 3.0};
}

// Writes the five statistics of xs into out at [j, d+j, 2d+j, 3d+j, 4d+j].
void aggregate_column(std::vector<double> xs, std::size_t j, std::size_t d, std::vector<double>& out) {
  const Moments m = moments(std::move(xs));
  out[j] = m.mean;
  out[d + j] = m.median;
  out[2 * d + j] = m.std;
  out[3 * d + j] = m.skew;
  out[4 * d + j] = m.kurtosis;
}

}  // namespace

std::vector<std::string> aggregate_feature_names(std::span<const std::string> base_names) {
  std::vector<std::string> out;
  out.reserve(base_names.size() * kNumAggregates);
  for (const char* stat : kStatNames) {
    for (const auto& n : base_names) out.push_back(n + "_" + stat);
  }
  return out;
}

std::vector<double> aggregate_edge_features(const Tensor& flow_features) {
  const std::size_t k = flow_features.rows(), d = flow_features.cols();
  if (k == 0) throw EmptyInput("cannot aggregate zero flows");
  std::vector<double> out(kNumAggregates * d);
  std::vector<double> col(k);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < k; ++i) col[i] = flow_features(i, j);
    aggregate_column(col, j, d, out);
  }
  return out;
}

namespace {

Tensor stack_flows(const SampleFlows& sample, std::span<const std::size_t> idx) {
  const std::size_t d = sample.flows.front().features.size();
  Tensor t(idx.size(), d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& f = sample.flows[idx[r]].features;
    if (f.size() != d) throw InconsistentDimension("flows of one sample differ in feature width");
    std::copy(f.begin(), f.end(), t.row(r).begin());
  }
  return t;
}

}  // namespace

FlowGraph build_flow_graph(const SampleFlows& sample) {
  if (sample.flows.empty()) throw EmptyInput(fmt::format("sample '{}' has no flows", sample.sample_id));
  FlowGraph g;
  g.sample_id = sample.sample_id;
  g.labels = sample.labels;
  std::unordered_map<std::string, std::size_t> node_index;
  auto node_of = [&](const std::string& ip) {
    auto [it, inserted] = node_index.try_emplace(ip, g.nodes.size());
    if (inserted) g.nodes.push_back(ip);
    return it->second;
  };
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index;
  std::vector<std::vector<std::size_t>> edge_flows;
  for (std::size_t i = 0; i < sample.flows.size(); ++i) {
    const auto& f = sample.flows[i];
    const std::size_t s = node_of(f.src_ip);
    const std::size_t t = node_of(f.dst_ip);
    auto [it, inserted] = edge_index.try_emplace({s, t}, g.edges.size());
    if (inserted) {
      g.edges.emplace_back(s, t);
      edge_flows.emplace_back();
    }
    edge_flows[it->second].push_back(i);
  }
  const std::size_t width = kNumAggregates * sample.flows.front().features.size();
  g.edge_features = Tensor(g.edges.size(), width);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto agg = aggregate_edge_features(stack_flows(sample, edge_flows[e]));
    std::copy(agg.begin(), agg.end(), g.edge_features.row(e).begin());
  }
  return g;
}

const std::vector<std::string>& structural_feature_names() {
  static const std::vector<std::string> names = [] {
    const std::vector<std::string> local = {"degree",
                                            "two_hop_neighbors",
                                            "clustering",
                                            "avg_neighbor_degree",
                                            "avg_neighbor_clustering",
                                            "egonet_edges",
                                            "egonet_out_edges",
                                            "betweenness"};
    std::vector<std::string> out = {"global_clustering", "assortativity"};
    for (const auto& n : aggregate_feature_names(local)) out.push_back(n);
    return out;
  }();
  return names;
}

namespace {

// Brandes' algorithm on an unweighted undirected graph; each unordered pair
// contributes once.
std::vector<double> betweenness(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<double> cb(n, 0.0);
  std::vector<std::vector<std::size_t>> preds(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> order;
    for (auto& p : preds) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      order.push_back(v);
      for (std::size_t w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  for (auto& c : cb) c /= 2.0;
  return cb;
}

}  // namespace

StructuralFeatures structural_features(const FlowGraph& graph) {
  const std::size_t n = graph.num_nodes();
  if (n == 0) throw EmptyInput("structural features need at least one node");
  std::vector<std::set<std::size_t>> nbr(n);
  for (const auto& [s, t] : graph.edges) {
    if (s == t) continue;
    nbr[s].insert(t);
    nbr[t].insert(s);
  }
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t v = 0; v < n; ++v) adj[v].assign(nbr[v].begin(), nbr[v].end());

  std::vector<double> deg(n), tri(n), clust(n);
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<double>(adj[v].size());
    std::size_t t = 0;
    for (std::size_t a = 0; a < adj[v].size(); ++a) {
      for (std::size_t b = a + 1; b < adj[v].size(); ++b) {
        if (nbr[adj[v][a]].contains(adj[v][b])) ++t;
      }
    }
    tri[v] = static_cast<double>(t);
    clust[v] = adj[v].size() < 2 ? 0.0 : 2.0 * tri[v] / (deg[v] * (deg[v] - 1.0));
  }

  double closed = 0.0, triples = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    closed += tri[v];
    triples += deg[v] * (deg[v] - 1.0) / 2.0;
  }
  const double global_clustering = triples > 0.0 ? closed / triples : 0.0;

  // Pearson correlation of endpoint degrees, each undirected edge in both orientations.
  double assortativity = 0.0;
  {
    std::vector<double> xs, ys;
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t u : adj[v]) {
        xs.push_back(deg[v]);
        ys.push_back(deg[u]);
      }
    }
    if (!xs.empty()) {
      const double k = static_cast<double>(xs.size());
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
      }
      mx /= k;
      my /= k;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
      }
      if (sxx > 0.0 && syy > 0.0) assortativity = sxy / std::sqrt(sxx * syy);
    }
  }

  std::vector<std::vector<double>> local(8, std::vector<double>(n, 0.0));
  const auto bc = betweenness(adj);
  for (std::size_t v = 0; v < n; ++v) {
    std::set<std::size_t> two_hop;
    for (std::size_t u : adj[v]) {
      for (std::size_t w : adj[u]) {
        if (w != v && !nbr[v].contains(w)) two_hop.insert(w);
      }
    }
    double nd = 0.0, nc = 0.0, ego_deg = deg[v];
    for (std::size_t u : adj[v]) {
      nd += deg[u];
      nc += clust[u];
      ego_deg += deg[u];
    }
    const double inside = deg[v] + tri[v];
    local[0][v] = deg[v];
    local[1][v] = static_cast<double>(two_hop.size());
    local[2][v] = clust[v];
    local[3][v] = adj[v].empty() ? 0.0 : nd / deg[v];
    local[4][v] = adj[v].empty() ? 0.0 : nc / deg[v];
    local[5][v] = inside;
    local[6][v] = ego_deg - 2.0 * inside;
    local[7][v] = bc[v];
  }

  StructuralFeatures out;
  out.names = structural_feature_names();
  out.values.assign(kNumStructuralFeatures, 0.0);
  out.values[0] = global_clustering;
  out.values[1] = assortativity;
  std::vector<double> agg(kNumAggregates * local.size());
  for (std::size_t f = 0; f < local.size(); ++f) aggregate_column(local[f], f, local.size(), agg);
  std::copy(agg.begin(), agg.end(), out.values.begin() + 2);
  return out;
}

std::vector<double> flow_aggregate_features(const SampleFlows& sample) {
  if (sample.flows.empty()) throw EmptyInput(fmt::format("sample '{}' has no flows", sample.sample_id));
  std::vector<std::size_t> all(sample.flows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return aggregate_edge_features(stack_flows(sample, all));
}

std::vector<double> combined_features(const SampleFlows& sample) {
  auto out = flow_aggregate_features(sample);
  const auto s = structural_features(build_flow_graph(sample));
  out.insert(out.end(), s.values.begin(), s.values.end());
  return out;
}

FeatureSet parse_feature_set(const std::string& s) {
  if (s == "flow") return FeatureSet::Flow;
  if (s == "graph") return FeatureSet::Graph;
  if (s == "combined") return FeatureSet::Combined;
  throw ConfigError("unknown feature set: " + s);
}

std::string to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::Flow: return "flow";
    case FeatureSet::Graph: return "graph";
    case FeatureSet::Combined: return "combined";
  }
  return "?";
}

std::vector<std::string> feature_set_names(FeatureSet set, std::span<const std::string> flow_feature_names) {
  std::vector<std::string> out;
  if (set != FeatureSet::Graph) {
    for (auto& n : aggregate_feature_names(flow_feature_names)) out.push_back("flow_" + n);
  }
  if (set != FeatureSet::Flow) {
    for (const auto& n : structural_feature_names()) out.push_back("graph_" + n);
  }
  return out;
}

std::vector<double> sample_features(const SampleFlows& sample, FeatureSet set) {
  switch (set) {
    case FeatureSet::Flow: return flow_aggregate_features(sample);
    case FeatureSet::Graph: return structural_features(build_flow_graph(sample)).values;
    case FeatureSet::Combined: return combined_features(sample);
  }
  return {};
}

std::string graph_to_json_line(const FlowGraph& g, std::span<const std::string> feature_names) {
  json j;
  j["id"] = g.sample_id;
  if (g.labels) {
    j["labels"] = {{"binary", g.labels->binary}, {"category", g.labels->category}};
    j["labels"]["family"] = g.labels->family ? json(*g.labels->family) : json(nullptr);
  } else {
    j["labels"] = nullptr;
  }
  j["nodes"] = g.nodes;
  json edges = json::array();
  for (const auto& [s, t] : g.edges) edges.push_back({s, t});
  j["edges"] = std::move(edges);
  json x = json::array();
  for (std::size_t r = 0; r < g.edge_features.rows(); ++r) {
    json row = json::array();
    for (double v : g.edge_features.row(r)) row.push_back(v);
    x.push_back(std::move(row));
  }
  j["x"] = std::move(x);
  j["feature_names"] = std::vector<std::string>(feature_names.begin(), feature_names.end());
  return dump_json(j);
}

FlowGraph graph_from_json_line(const std::string& line, std::vector<std::string>* feature_names) {
  FlowGraph g;
  try {
    const json j = json::parse(line);
    g.sample_id = j.at("id").get<std::string>();
    if (j.contains("labels") && !j["labels"].is_null()) {
      LabelTriple l;
      l.binary = j["labels"].at("binary").get<int>();
      l.category = j["labels"].value("category", l.binary);
      if (j["labels"].contains("family") && !j["labels"]["family"].is_null()) {
        l.family = j["labels"]["family"].get<int>();
      }
      g.labels = l;
    }
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    const auto& x = j.at("x");
    const std::size_t width = x.empty() ? 0 : x.at(0).size();
    g.edge_features = Tensor(x.size(), width);
    for (std::size_t r = 0; r < x.size(); ++r) {
      if (x[r].size() != width) throw InconsistentDimension("ragged edge feature matrix in graph " + g.sample_id);
      for (std::size_t c = 0; c < width; ++c) g.edge_features(r, c) = x[r][c].get<double>();
    }
    if (feature_names && j.contains("feature_names")) {
      *feature_names = j["feature_names"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed graph line: ") + e.what());
  }
  if (g.edge_features.rows() != g.edges.size()) {
    throw InconsistentDimension(fmt::format("graph '{}': {} feature rows for {} edges", g.sample_id,
                                            g.edge_features.rows(), g.edges.size()));
  }
  for (const auto& [s, t] : g.edges) {
    if (s >= g.nodes.size() || t >= g.nodes.size()) {
      throw ConfigError(fmt::format("graph '{}': edge endpoint out of range", g.sample_id));
    }
  }
  return g;
}

void write_graphs(const std::filesystem::path& path, std::span<const FlowGraph> graphs,
                  std::span<const std::string> feature_names) {
  std::string text;
  for (const auto& g : graphs) {
    text += graph_to_json_line(g, feature_names);
    text += '\n';
  }
  write_text_file(path, text);
}

GraphFile read_graphs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file: " + path.string());
  GraphFile out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> names;
    out.graphs.push_back(graph_from_json_line(line, &names));
    if (out.graphs.size() == 1) {
      out.feature_names = std::move(names);
    } else if (out.graphs.back().edge_features.cols() != out.graphs.front().edge_features.cols()) {
      throw InconsistentDimension("graphs in " + path.string() + " differ in edge feature width");
    }
  }
  return out;
}

}  // namespace nfgnn
