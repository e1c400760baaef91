#include "nfgnn/model.hpp"

#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

PropagationPair propagation_matrices(const FlowGraph& graph) {
  const std::size_t n = graph.num_nodes(), m = graph.num_edges();
  if (m == 0) throw EmptyGraph(fmt::format("graph '{}' has no edges", graph.sample_id));
  std::vector<double> deg(n, 0.0);
  for (const auto& [u, v] : graph.edges) {
    deg[u] += 1.0;
    if (v != u) deg[v] += 1.0;
  }
  PropagationPair p;
  p.b_in = {n, m, {}};
  p.b_out = {n, m, {}};
  p.b_in.entries.reserve(m);
  p.b_out.entries.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    const auto [u, v] = graph.edges[e];
    const double w = 1.0 / std::sqrt((deg[u] + 1.0) * (deg[v] + 1.0));
    p.b_out.entries.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(e), w});
    p.b_in.entries.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(e), w});
  }
  return p;
}

GraphInput make_graph_input(const FlowGraph& graph, Tensor standardized_x) {
  if (standardized_x.rows() != graph.num_edges()) {
    throw ShapeMismatch(fmt::format("graph '{}': {} feature rows for {} edges", graph.sample_id,
                                    standardized_x.rows(), graph.num_edges()));
  }
  return GraphInput{std::move(standardized_x), propagation_matrices(graph), graph.num_nodes()};
}

GraphBatch make_batch(std::span<const GraphInput> graphs, std::span<const std::size_t> indices) {
  GraphBatch b;
  std::size_t n = 0, m = 0, width = 0;
  for (std::size_t i : indices) {
    n += graphs[i].num_nodes;
    m += graphs[i].num_edges();
    width = graphs[i].x.cols();
  }
  b.x = Tensor(m, width);
  b.prop.b_in = {n, m, {}};
  b.prop.b_out = {n, m, {}};
  b.node_offsets.push_back(0);
  b.edge_offsets.push_back(0);
  std::size_t no = 0, eo = 0;
  for (std::size_t i : indices) {
    const GraphInput& g = graphs[i];
    if (g.x.cols() != width) throw ShapeMismatch("graphs in one batch differ in feature width");
    std::copy(g.x.data().begin(), g.x.data().end(), b.x.data().begin() + static_cast<std::ptrdiff_t>(eo * width));
    for (const auto& e : g.prop.b_in.entries) {
      b.prop.b_in.entries.push_back({static_cast<std::uint32_t>(e.row + no), static_cast<std::uint32_t>(e.col + eo), e.value});
    }
    for (const auto& e : g.prop.b_out.entries) {
      b.prop.b_out.entries.push_back({static_cast<std::uint32_t>(e.row + no), static_cast<std::uint32_t>(e.col + eo), e.value});
    }
    no += g.num_nodes;
    eo += g.num_edges();
    b.node_offsets.push_back(no);
    b.edge_offsets.push_back(eo);
  }
  return b;
}

GraphBatch make_batch(std::span<const GraphInput> graphs) {
  std::vector<std::size_t> all(graphs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(graphs, all);
}

Variant parse_variant(const std::string& s) {
  if (s == "clf") return Variant::Classifier;
  if (s == "ae") return Variant::Autoencoder;
  if (s == "oc") return Variant::OneClass;
  throw ConfigError("unknown model variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Classifier: return "clf";
    case Variant::Autoencoder: return "ae";
    case Variant::OneClass: return "oc";
  }
  return "?";
}

Pool parse_pool(const std::string& s) {
  if (s == "mean") return Pool::Mean;
  if (s == "add") return Pool::Add;
  if (s == "max") return Pool::Max;
  throw ConfigError("unknown pooling: " + s);
}

std::string to_string(Pool p) {
  switch (p) {
    case Pool::Mean: return "mean";
    case Pool::Add: return "add";
    case Pool::Max: return "max";
  }
  return "?";
}

NfGnnModel::NfGnnModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  if (config_.num_layers != 1 && config_.num_layers != 2) {
    throw ConfigError(fmt::format("num_layers must be 1 or 2, got {}", config_.num_layers));
  }
  if (config_.num_hidden <= 0) throw ConfigError("num_hidden must be positive");
  if (config_.in_features == 0) throw ConfigError("model needs at least one input feature");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  Rng rng(init_seed);
  const std::size_t h = static_cast<std::size_t>(config_.num_hidden);
  const bool oc = config_.variant == Variant::OneClass;
  auto spec = [&](const char* name, std::size_t in, std::size_t out) {
    BlockSpec s;
    s.name = name;
    s.in = in;
    s.out = out;
    s.bias = !oc;
    s.batch_norm = config_.batch_norm;
    s.bn_affine = !oc;
    s.relu = config_.relu;
    return s;
  };
  auto make = [&](const BlockSpec& s) {
    DenseBlock b = store_.make_block(s, rng);
    if (b.bn) {
      b.bn->momentum = config_.bn_momentum;
      b.bn->eps = config_.bn_eps;
    }
    return b;
  };
  f1_ = make(spec("f1", config_.in_features, h));
  f2_ = make(spec("f2", 2 * h, h));
  if (config_.num_layers == 2) {
    f3_ = make(spec("f3", 3 * h, h));
    f4_ = make(spec("f4", 3 * h, h));
  }
  switch (config_.variant) {
    case Variant::Classifier: {
      BlockSpec s = spec("head", h, config_.num_classes);
      s.batch_norm = false;
      s.relu = false;
      head_ = make(s);
      break;
    }
    case Variant::Autoencoder: {
      if (config_.num_layers == 2) {
        f5_ = make(spec("f5", 2 * h, h));
        f6_ = make(spec("f6", 3 * h, h));
        f7_ = make(spec("f7", 3 * h, h));
      } else {
        f7_ = make(spec("f7", 2 * h, h));
      }
      BlockSpec s = spec("f8", h, config_.in_features);
      s.batch_norm = false;
      s.relu = false;
      f8_ = make(s);
      break;
    }
    case Variant::OneClass:
      break;
  }
}

namespace {

std::shared_ptr<const PropagationPair> maybe_drop(const PropagationPair& p, double dropout, Mode mode, Rng& rng) {
  // Non-owning alias when nothing is dropped.
  if (mode == Mode::Eval || dropout <= 0.0) return std::shared_ptr<const PropagationPair>(std::shared_ptr<void>(), &p);
  return std::make_shared<const PropagationPair>(
      PropagationPair{dropout_entries(p.b_in, dropout, rng), dropout_entries(p.b_out, dropout, rng)});
}

}  // namespace

NfGnnModel::Encoded NfGnnModel::encode(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng) {
  if (batch.x.cols() != config_.in_features) {
    throw ShapeMismatch(fmt::format("model expects {} edge features, batch has {}", config_.in_features,
                                    batch.x.cols()));
  }
  const double p = config_.dropout;
  const auto prop = maybe_drop(batch.prop, p, mode, rng);
  const SparseMatrix& bin = prop->b_in;
  const SparseMatrix& bout = prop->b_out;
  Encoded enc;
  ad::Var x = tape.constant(batch.x);
  enc.e0 = f1_.forward(x, mode, rng, p);
  enc.h0 = f2_.forward(ad::concat_cols({ad::sparse_matmul(bin, enc.e0), ad::sparse_matmul(bout, enc.e0)}), mode,
                       rng, p);
  if (config_.num_layers == 2) {
    enc.e1 = f3_.forward(ad::concat_cols({ad::sparse_matmul(bin, enc.h0, true),
                                          ad::sparse_matmul(bout, enc.h0, true), enc.e0}),
                         mode, rng, p);
    enc.h1 = f4_.forward(
        ad::concat_cols({ad::sparse_matmul(bin, enc.e1), ad::sparse_matmul(bout, enc.e1), enc.h0}), mode, rng, p);
  }
  return enc;
}

ad::Var NfGnnModel::pooled(ad::Tape&, const GraphBatch& batch, const Encoded& enc) {
  return ad::segment_pool(enc.final_nodes(), batch.node_offsets, config_.pool);
}

ad::Var NfGnnModel::classify(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng) {
  if (config_.variant != Variant::Classifier) throw ConfigError("classify() needs the classifier variant");
  const Encoded enc = encode(tape, batch, mode, rng);
  return head_.forward(pooled(tape, batch, enc), mode, rng, config_.dropout);
}

ad::Var NfGnnModel::decode(ad::Tape& tape, const GraphBatch& batch, const Encoded& enc, Mode mode, Rng& rng) {
  (void)tape;
  if (config_.variant != Variant::Autoencoder) throw ConfigError("decode() needs the autoencoder variant");
  const double p = config_.dropout;
  const auto prop = maybe_drop(batch.prop, p, mode, rng);
  const SparseMatrix& bin = prop->b_in;
  const SparseMatrix& bout = prop->b_out;
  ad::Var e3;
  if (config_.num_layers == 2) {
    const ad::Var h_in = enc.h1;
    ad::Var e2 = f5_.forward(
        ad::concat_cols({ad::sparse_matmul(bin, h_in, true), ad::sparse_matmul(bout, h_in, true)}), mode, rng, p);
    ad::Var h2 =
        f6_.forward(ad::concat_cols({ad::sparse_matmul(bin, e2), ad::sparse_matmul(bout, e2), h_in}), mode, rng, p);
    e3 = f7_.forward(
        ad::concat_cols({ad::sparse_matmul(bin, h2, true), ad::sparse_matmul(bout, h2, true), e2}), mode, rng, p);
  } else {
    const ad::Var h_in = enc.h0;
    e3 = f7_.forward(
        ad::concat_cols({ad::sparse_matmul(bin, h_in, true), ad::sparse_matmul(bout, h_in, true)}), mode, rng, p);
  }
  return f8_.forward(e3, mode, rng, p);
}

ad::Var NfGnnModel::clf_loss(ad::Tape& tape, const GraphBatch& batch, std::span<const int> targets, Mode mode,
                             Rng& rng) {
  return ad::cross_entropy(classify(tape, batch, mode, rng), targets);
}

namespace {

std::vector<double> edge_weights(const GraphBatch& batch) {
  const double n = static_cast<double>(batch.num_graphs());
  std::vector<double> w(batch.x.rows());
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    const std::size_t lo = batch.edge_offsets[g], hi = batch.edge_offsets[g + 1];
    for (std::size_t e = lo; e < hi; ++e) w[e] = 1.0 / (n * static_cast<double>(hi - lo));
  }
  return w;
}

}  // namespace

ad::Var NfGnnModel::ae_loss(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng) {
  const Encoded enc = encode(tape, batch, mode, rng);
  ad::Var xhat = decode(tape, batch, enc, mode, rng);
  ad::Var diff = ad::sub(xhat, tape.constant(batch.x));
  return ad::sum_all(ad::mul_rows(ad::square(diff), edge_weights(batch)));
}

std::vector<Parameter*> NfGnnModel::encoder_weights() const {
  std::vector<Parameter*> out;
  for (const DenseBlock* b : {&f1_, &f2_, &f3_, &f4_}) {
    if (b->weight) out.push_back(b->weight);
  }
  return out;
}

ad::Var NfGnnModel::oc_loss(ad::Tape& tape, const GraphBatch& batch, Mode mode, Rng& rng) {
  if (config_.variant != Variant::OneClass) throw ConfigError("oc_loss() needs the one-class variant");
  if (!center_) throw ConfigError("one-class center has not been initialized");
  const Encoded enc = encode(tape, batch, mode, rng);
  ad::Var dist = ad::sum_all(ad::square(ad::sub_row(pooled(tape, batch, enc), *center_)));
  ad::Var data_term = ad::scale(dist, 1.0 / static_cast<double>(batch.num_graphs()));
  if (config_.lambda == 0.0) return data_term;
  const auto ws = encoder_weights();
  return ad::add(data_term, l2_penalty(tape, ws, config_.lambda));
}

ad::Var NfGnnModel::loss(ad::Tape& tape, const GraphBatch& batch, std::span<const int> targets, Mode mode,
                         Rng& rng) {
  switch (config_.variant) {
    case Variant::Classifier: return clf_loss(tape, batch, targets, mode, rng);
    case Variant::Autoencoder: return ae_loss(tape, batch, mode, rng);
    case Variant::OneClass: return oc_loss(tape, batch, mode, rng);
  }
  throw ConfigError("unknown variant");
}

void NfGnnModel::init_center(std::span<const GraphInput> graphs) {
  if (graphs.empty()) throw ConfigError("cannot initialize the center from zero graphs");
  const GraphBatch batch = make_batch(graphs);
  ad::Tape tape;
  Rng rng(0);
  const Encoded enc = encode(tape, batch, Mode::Eval, rng);
  const Tensor& h = pooled(tape, batch, enc).value();
  Tensor mu(1, h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) mu[j] += h(i, j);
  }
  for (auto& v : mu.data()) v /= static_cast<double>(h.rows());
  center_ = std::move(mu);
}

std::vector<double> NfGnnModel::anomaly_scores(const GraphBatch& batch) {
  ad::Tape tape;
  Rng rng(0);
  std::vector<double> scores(batch.num_graphs(), 0.0);
  const Encoded enc = encode(tape, batch, Mode::Eval, rng);
  if (config_.variant == Variant::Autoencoder) {
    const Tensor& xhat = decode(tape, batch, enc, Mode::Eval, rng).value();
    for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
      const std::size_t lo = batch.edge_offsets[g], hi = batch.edge_offsets[g + 1];
      double s = 0.0;
      for (std::size_t e = lo; e < hi; ++e) {
        for (std::size_t j = 0; j < xhat.cols(); ++j) {
          const double d = batch.x(e, j) - xhat(e, j);
          s += d * d;
        }
      }
      scores[g] = s / static_cast<double>(hi - lo);
    }
  } else if (config_.variant == Variant::OneClass) {
    if (!center_) throw ConfigError("one-class center has not been initialized");
    const Tensor& h = pooled(tape, batch, enc).value();
    for (std::size_t g = 0; g < h.rows(); ++g) {
      double s = 0.0;
      for (std::size_t j = 0; j < h.cols(); ++j) {
        const double d = h(g, j) - (*center_)[j];
        s += d * d;
      }
      scores[g] = s;
    }
  } else {
    throw ConfigError("anomaly scores need the autoencoder or one-class variant");
  }
  return scores;
}

Tensor NfGnnModel::predict_proba(const GraphBatch& batch) {
  ad::Tape tape;
  Rng rng(0);
  return softmax_rows(classify(tape, batch, Mode::Eval, rng).value());
}

}  // namespace nfgnn
