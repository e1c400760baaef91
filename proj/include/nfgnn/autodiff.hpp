#pragma once

// Reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records every op executed during one forward pass. Each recorded
// node stores its value and a closure that pushes its output gradient back to
// its inputs. Tape::backward walks the nodes in reverse creation order, which
// is a valid topological order because inputs always precede outputs.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nfgnn/rng.hpp"
#include "nfgnn/tensor.hpp"

namespace nfgnn {

enum class Mode { Train, Eval };

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
};

/// Owns parameters with stable addresses; layers keep raw pointers into it.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  std::vector<Parameter*> all() const;
  Parameter* find(const std::string& name) const;
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t num_scalars() const noexcept;

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

struct BatchNormState {
  std::string name;
  Parameter* gamma = nullptr;  // absent in affine-free mode
  Parameter* beta = nullptr;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Sparse matrix in coordinate form. Used for the propagation matrices.
struct SparseMatrix {
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;

  Tensor to_dense() const;
};

namespace ad {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  /// Records a derived node. Throws NumericalError on a non-finite value.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Tensor& g);

  /// Zeroes every parameter gradient reachable on this tape, then fills them
  /// with d(loss)/d(param). Throws NotScalarLoss unless loss is 1×1.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

// Dense ops.
Var matmul(Var a, Var b);
Var add_row(Var x, Var row);  // x + broadcast(row), row is 1×cols
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var sub_row(Var x, const Tensor& row);
Var scale(Var x, double s);
Var square(Var x);
Var sum_all(Var x);
Var mul_rows(Var x, std::span<const double> row_weights);
Var relu(Var x);
Var softmax_rows(Var x);
Var concat_cols(std::span<const Var> parts);
inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// a @ x when transpose is false, aᵀ @ x otherwise.
Var sparse_matmul(const SparseMatrix& a, Var x, bool transpose = false);

Var batch_norm(Var x, BatchNormState& state, Mode mode);
Var dropout(Var x, double p_drop, Rng& rng, Mode mode);

enum class Pool { Mean, Add, Max };

/// Pools contiguous row segments [offsets[g], offsets[g+1]) into one row each.
Var segment_pool(Var x, std::span<const std::size_t> offsets, Pool pool);

/// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace ad

Tensor softmax_rows(const Tensor& x);
SparseMatrix dropout_entries(const SparseMatrix& m, double p_drop, Rng& rng);

}  // namespace nfgnn
