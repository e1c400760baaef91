#pragma once

// Shared fixtures for the unit and acceptance tests: random graphs, node
// permutations, scratch directories and brute-force metric/moment oracles.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nfgnn/graph_builder.hpp"
#include "nfgnn/rng.hpp"
#include "nfgnn/tensor.hpp"

namespace nfgnn::testing {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(rows, cols);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

/// Connected random directed graph with distinct ordered edges and at least
/// one edge; self-loops appear with small probability.
inline FlowGraph random_graph(std::size_t min_nodes, std::size_t max_nodes, std::size_t dim, Rng& rng) {
  const auto n = std::uniform_int_distribution<std::size_t>(min_nodes, max_nodes)(rng);
  FlowGraph g;
  g.sample_id = "g";
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("10.0.0." + std::to_string(i));
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    edges.insert(coin(rng) ? std::pair{i, j} : std::pair{j, i});
  }
  std::bernoulli_distribution extra(0.25), loop(0.1);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b ? loop(rng) : extra(rng)) edges.emplace(a, b);
    }
  }
  if (edges.empty()) edges.emplace(0, 0);
  g.edges.assign(edges.begin(), edges.end());
  g.edge_features = random_matrix(g.edges.size(), dim, rng);
  return g;
}

/// Relabels node i as perm[i] and shuffles the edge order; edge features
/// travel with their edges.
inline FlowGraph permute_graph(const FlowGraph& g, Rng& rng) {
  const std::size_t n = g.num_nodes(), m = g.num_edges();
  std::vector<std::size_t> perm(n), order(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::shuffle(order.begin(), order.end(), rng);
  FlowGraph p;
  p.sample_id = g.sample_id;
  p.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.nodes[perm[i]] = g.nodes[i];
  p.edge_features = Tensor(m, g.edge_features.cols());
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t e = order[k];
    p.edges.emplace_back(perm[g.edges[e].first], perm[g.edges[e].second]);
    for (std::size_t j = 0; j < g.edge_features.cols(); ++j) p.edge_features(k, j) = g.edge_features(e, j);
  }
  p.labels = g.labels;
  return p;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nfgnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// --- oracles -----------------------------------------------------------------

/// Weighted F1 straight from a confusion matrix.
inline double brute_weighted_f1(const std::vector<int>& y, const std::vector<int>& p) {
  std::set<int> labels(y.begin(), y.end());
  labels.insert(p.begin(), p.end());
  long double total = 0.0L;
  for (int c : labels) {
    long tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) ++support;
      if (y[i] == c && p[i] == c) ++tp;
      if (y[i] != c && p[i] == c) ++fp;
      if (y[i] == c && p[i] != c) ++fn;
    }
    const long double f1 = tp == 0 ? 0.0L : 2.0L * tp / (2.0L * tp + fp + fn);
    total += f1 * support;
  }
  return static_cast<double>(total / static_cast<long double>(y.size()));
}

/// Pairwise AUROC: wins + ties/2 over every positive-negative pair.
inline double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  long double num = 0.0L;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) num += 1.0L;
      else if (s[i] == s[j]) num += 0.5L;
    }
  }
  return static_cast<double>(num / pairs);
}

/// [mean | median | std | skew | kurtosis] blocks from direct moments.
inline std::vector<double> direct_moments(const Tensor& x) {
  const std::size_t k = x.rows(), d = x.cols();
  std::vector<double> out(5 * d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<long double> col;
    for (std::size_t i = 0; i < k; ++i) col.push_back(x(i, j));
    long double mean = 0.0L;
    for (auto v : col) mean += v;
    mean /= k;
    long double m2 = 0.0L, m3 = 0.0L, m4 = 0.0L;
    for (auto v : col) {
      const long double c = v - mean;
      m2 += c * c;
      m3 += c * c * c;
      m4 += c * c * c * c;
    }
    m2 /= k;
    m3 /= k;
    m4 /= k;
    std::sort(col.begin(), col.end());
    const long double median = k % 2 ? col[k / 2] : (col[k / 2 - 1] + col[k / 2]) / 2.0L;
    const bool flat = col.front() == col.back();
    out[j] = static_cast<double>(mean);
    out[d + j] = static_cast<double>(median);
    out[2 * d + j] = flat ? 0.0 : static_cast<double>(std::sqrt(m2));
    out[3 * d + j] = flat ? 0.0 : static_cast<double>(m3 / std::pow(m2, 1.5L));
    out[4 * d + j] = flat ? 0.0 : static_cast<double>(m4 / (m2 * m2) - 3.0L);
  }
  return out;
}

/// Closed-form propagation weight per edge: 1/sqrt((deg(u)+1)(deg(v)+1)),
/// degree = distinct incident edges.
inline std::vector<double> closed_form_weights(const FlowGraph& g) {
  auto degree = [&](std::size_t node) {
    return static_cast<double>(std::count_if(g.edges.begin(), g.edges.end(),
                                             [&](const auto& e) { return e.first == node || e.second == node; }));
  };
  std::vector<double> w;
  for (const auto& [u, v] : g.edges) w.push_back(1.0 / std::sqrt((degree(u) + 1.0) * (degree(v) + 1.0)));
  return w;
}

}  // namespace nfgnn::testing
