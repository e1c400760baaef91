#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfgnn/autodiff.hpp"
#include "nfgnn/graph_builder.hpp"
#include "nfgnn/nn.hpp"

namespace nfgnn {

/// Normalized incidence matrices. b_in(v, e) != 0 iff edge e enters v,
/// b_out(u, e) != 0 iff edge e leaves u.
struct PropagationPair {
  SparseMatrix b_in;
  SparseMatrix b_out;
};

/// Edge e = (u, v) gets weight 1/sqrt((deg(u)+1)(deg(v)+1)) where deg counts
/// distinct incident edges in either direction (a self-loop counts once).
/// Throws EmptyGraph when the graph has no edges.
PropagationPair propagation_matrices(const FlowGraph& graph);

/// One graph ready for the network: standardized edge features plus its
/// propagation matrices.
struct GraphInput {
  Tensor x;
  PropagationPair prop;
  std::size_t num_nodes = 0;

  std::size_t num_edges() const noexcept { return x.rows(); }
};

GraphInput make_graph_input(const FlowGraph& graph, Tensor standardized_x);

/// Disjoint union of several graphs: block-diagonal propagation matrices and
/// stacked edge features.
struct GraphBatch {
  Tensor x;
  PropagationPair prop;
  std::vector<std::size_t> node_offsets;
  std::vector<std::size_t> edge_offsets;

  std::size_t num_graphs() const noexcept { return node_offsets.size() - 1; }
};

GraphBatch make_batch(std::span<const GraphInput> graphs, std::span<const std::size_t> indices);
GraphBatch make_batch(std::span<const GraphInput> graphs);

enum class Variant { Classifier, Autoencoder, OneClass };
Variant parse_variant(const std::string& s);
std::string to_string(Variant v);

using ad::Pool;
Pool parse_pool(const std::string& s);
std::string to_string(Pool p);

struct ModelConfig {
  Variant variant = Variant::Classifier;
  int num_layers = 2;
  int num_hidden = 32;
  Pool pool = Pool::Mean;
  double dropout = 0.0;
  double lambda = 1e-3;  // one-class weight decay
  std::size_t in_features = 0;
  std::size_t num_classes = 2;
  bool batch_norm = true;
  bool relu = true;  // false only in hand-checkable test setups
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

class NfGnnModel {
 public:
  NfGnnModel(const ModelConfig& config, std::uint64_t init_seed);

  struct Encoded {
    ad::Var e0, h0, e1, h1;
    ad::Var final_nodes() const { return h1.valid() ? h1 : h0; }
  };

  Encoded encode(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng);
  /// Per-graph pooled embedding, num_graphs x h.
  ad::Var pooled(ad::Tape& tape, const GraphBatch& batch, const Encoded& enc);
  /// num_graphs x c logits.
  ad::Var classify(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng);
  /// m x in_features reconstruction of the edge features.
  ad::Var decode(ad::Tape& tape, const GraphBatch& batch, const Encoded& enc, Mode mode, Rng& rng);

  /// Mean cross-entropy over the batch graphs.
  ad::Var clf_loss(ad::Tape& tape, const GraphBatch& batch, std::span<const int> targets, Mode mode, Rng& rng);
  /// (1/N) sum_i (1/m_i) ||X_i - Xhat_i||_F^2.
  ad::Var ae_loss(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng);
  /// (1/N) sum_i ||h_i - mu||^2 + (lambda/2) sum ||W||_F^2. Requires a center.
  ad::Var oc_loss(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng);

  /// Training objective of the configured variant.
  ad::Var loss(ad::Tape& tape, const GraphBatch& batch, std::span<const int> targets, Mode mode, Rng& rng);

  /// Eval-mode mean pooled embedding of the given graphs; stored as the frozen center.
  void init_center(std::span<const GraphInput> graphs);
  const std::optional<Tensor>& center() const noexcept { return center_; }
  void set_center(Tensor c) { center_ = std::move(c); }

  /// Eval-mode per-graph scores: anomaly score (AE/OC, larger = more anomalous).
  std::vector<double> anomaly_scores(const GraphBatch& batch);
  /// Eval-mode class probabilities, num_graphs x c.
  Tensor predict_proba(const GraphBatch& batch);

  const ModelConfig& config() const noexcept { return config_; }
  ModuleStore& store() noexcept { return store_; }
  const ModuleStore& store() const noexcept { return store_; }
  std::vector<Parameter*> parameters() const { return store_.params().all(); }

  /// Weights regularized by the one-class objective (f1..f4).
  std::vector<Parameter*> encoder_weights() const;

 private:
  ModelConfig config_;
  ModuleStore store_;
  DenseBlock f1_, f2_, f3_, f4_;
  DenseBlock f5_, f6_, f7_, f8_;
  DenseBlock head_;
  std::optional<Tensor> center_;
};

}  // namespace nfgnn
