#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nfgnn/autodiff.hpp"

namespace nfgnn {

/// q(dropout(x) W + b), with optional batch norm between the affine map and q.
struct DenseBlock {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  BatchNormState* bn = nullptr;
  bool relu = true;

  std::size_t in_width() const { return weight->value.rows(); }
  std::size_t out_width() const { return weight->value.cols(); }

  ad::Var forward(ad::Var x, Mode mode, Rng& rng, double dropout_p) const;
};

struct BlockSpec {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;
  bool batch_norm = true;
  bool bn_affine = true;
  bool relu = true;
};

/// Parameters plus batch-norm states for one model. Non-copyable: layers hold
/// raw pointers into the owned storage.
class ModuleStore {
 public:
  ModuleStore() = default;
  ModuleStore(const ModuleStore&) = delete;
  ModuleStore& operator=(const ModuleStore&) = delete;
  ModuleStore(ModuleStore&&) = default;
  ModuleStore& operator=(ModuleStore&&) = default;

  /// Glorot-uniform weights, zero biases, unit gamma.
  DenseBlock make_block(const BlockSpec& spec, Rng& rng);

  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  std::vector<BatchNormState*> batch_norms() const;

  struct State {
    std::vector<Tensor> params;
    std::vector<std::vector<double>> running_mean;
    std::vector<std::vector<double>> running_var;
  };
  State snapshot() const;
  void restore(const State& s);

  /// Weight matrices only (names ending in ".weight").
  std::vector<Parameter*> weights() const;

 private:
  ParameterSet params_;
  std::vector<std::unique_ptr<BatchNormState>> bns_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update over params using their current grads.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// (lambda / 2) * sum of squared Frobenius norms of the given weights.
ad::Var l2_penalty(ad::Tape& tape, std::span<Parameter* const> weights, double lambda);

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t max_coords = 200;  // all coordinates are checked when fewer exist
  std::uint64_t seed = 0;
};

/// Compares backward() against central differences. model_fn must build the
/// same deterministic scalar loss on a fresh tape each time it is called.
GradCheckReport finite_difference_check(const std::function<ad::Var(ad::Tape&)>& model_fn,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& opts = {});

}  // namespace nfgnn
