#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nfgnn/model.hpp"
#include "nfgnn/nn.hpp"

namespace nfgnn {

/// Dense baselines over per-sample feature vectors.
///   clf: num_layers ReLU layers of width h, then a softmax layer.
///   ae:  num_layers ReLU layers down to h, mirrored back, linear output.
///   oc:  bias-free ReLU layers with a linear last layer, Deep-SVDD style
///        objective around a frozen center.
struct MlpConfig {
  Variant variant = Variant::Classifier;
  int num_layers = 1;
  int num_hidden = 32;
  double l2 = 0.0;
  std::size_t in_features = 0;
  std::size_t num_classes = 2;
};

class MlpModel {
 public:
  MlpModel(const MlpConfig& config, std::uint64_t init_seed);

  ad::Var forward(ad::Tape& tape, const Tensor& x, Mode mode, Rng& rng);
  ad::Var loss(ad::Tape& tape, const Tensor& x, std::span<const int> targets, Mode mode, Rng& rng);

  void init_center(const Tensor& x);
  const std::optional<Tensor>& center() const noexcept { return center_; }
  void set_center(Tensor c) { center_ = std::move(c); }

  Tensor predict_proba(const Tensor& x);
  std::vector<double> anomaly_scores(const Tensor& x);

  const MlpConfig& config() const noexcept { return config_; }
  ModuleStore& store() noexcept { return store_; }
  const ModuleStore& store() const noexcept { return store_; }
  std::vector<Parameter*> parameters() const { return store_.params().all(); }

 private:
  MlpConfig config_;
  ModuleStore store_;
  std::vector<DenseBlock> layers_;
  std::optional<Tensor> center_;
};

}  // namespace nfgnn
