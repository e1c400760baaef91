#include "nfgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

Parameter& ParameterSet::add(std::string name, Tensor value) {
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

std::vector<Parameter*> ParameterSet::all() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::size_t ParameterSet::num_scalars() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw ShapeMismatch("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i]->value)) {
      throw ShapeMismatch("parameter snapshot shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

Tensor SparseMatrix::to_dense() const {
  Tensor out(rows, cols);
  for (const auto& e : entries) out(e.row, e.col) += e.value;
  return out;
}

namespace ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite constant fed to tape");
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (!p.value.all_finite()) throw NumericalError("parameter " + p.name + " is not finite");
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericalError("non-finite value produced in forward pass");
  bool needs = false;
  for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw NotScalarLoss(fmt::format("backward() needs a 1x1 loss, got {}x{}", root.value.rows(),
                                    root.value.cols()));
  }
  for (auto& n : nodes_) {
    if (n.param) n.param->grad = Tensor(n.param->value.rows(), n.param->value.cols());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) return;
  root.grad = Tensor(1, 1, 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

// c += a @ b  (or variants with transposes), all row-major.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// c += a @ bᵀ
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c(i, j) += s;
    }
  }
}

// c += aᵀ @ b
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a(r, i);
      if (av == 0.0) continue;
      double* ci = &c(i, 0);
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * br[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), fmt::format("matmul: {}x{} @ {}x{}", av.rows(), av.cols(),
                                              bv.rows(), bv.cols()));
  Tensor out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  const Var inputs[] = {a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), inputs, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor ga(t.value(ia).rows(), t.value(ia).cols());
      gemm_nt(g, t.value(ib), ga);
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb(t.value(ib).rows(), t.value(ib).cols());
      gemm_tn(t.value(ia), g, gb);
      t.accumulate(ib, gb);
    }
  });
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == xv.cols(), "add_row: row vector width mismatch");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv[j];
  }
  const Var inputs[] = {x, row};
  const auto ix = x.id(), ir = row.id();
  return x.tape().record(std::move(out), inputs, [ix, ir](Tape& t, const Tensor& g) {
    t.accumulate(ix, g);
    if (t.requires_grad(ir)) {
      Tensor gr(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
      }
      t.accumulate(ir, gr);
    }
  });
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor out = a.value();
  out += b.value();
  const Var inputs[] = {a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), inputs, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const Var inputs[] = {a, b};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), inputs, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) {
      Tensor neg = g;
      for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
      t.accumulate(ib, neg);
    }
  });
}

Var sub_row(Var x, const Tensor& row) {
  const Tensor& xv = x.value();
  require(row.rows() == 1 && row.cols() == xv.cols(), "sub_row: row vector width mismatch");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= row[j];
  }
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs,
                         [ix](Tape& t, const Tensor& g) { t.accumulate(ix, g); });
}

Var scale(Var x, double s) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= s;
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs, [ix, s](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (auto& v : gx.data()) v *= s;
    t.accumulate(ix, gx);
  });
}

Var square(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= v;
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs, [ix](Tape& t, const Tensor& g) {
    Tensor gx = g;
    const Tensor& xv = t.value(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 2.0 * xv[i];
    t.accumulate(ix, gx);
  });
}

Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(Tensor(1, 1, s), inputs, [ix](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    t.accumulate(ix, Tensor(xv.rows(), xv.cols(), g[0]));
  });
}

Var mul_rows(Var x, std::span<const double> row_weights) {
  const Tensor& xv = x.value();
  require(row_weights.size() == xv.rows(), "mul_rows: weight count mismatch");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (auto& v : out.row(i)) v *= row_weights[i];
  }
  std::vector<double> w(row_weights.begin(), row_weights.end());
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs, [ix, w = std::move(w)](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.rows(); ++i) {
      for (auto& v : gx.row(i)) v *= w[i];
    }
    t.accumulate(ix, gx);
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs, [ix](Tape& t, const Tensor& g) {
    Tensor gx = g;
    const Tensor& xv = t.value(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (!(xv[i] > 0.0)) gx[i] = 0.0;
    }
    t.accumulate(ix, gx);
  });
}

}  // namespace ad

Tensor softmax_rows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (auto& v : r) {
      v = std::exp(v - mx);
      s += v;
    }
    for (auto& v : r) v /= s;
  }
  return out;
}

namespace ad {

Var softmax_rows(Var x) {
  Tensor out = nfgnn::softmax_rows(x.value());
  const Var inputs[] = {x};
  const auto ix = x.id();
  Tensor probs = out;
  return x.tape().record(std::move(out), inputs, [ix, probs = std::move(probs)](Tape& t, const Tensor& g) {
    Tensor gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * probs(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) = probs(i, j) * (g(i, j) - dot);
    }
    t.accumulate(ix, gx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require(p.value().rows() == rows, "concat_cols: row count mismatch");
    cols += p.value().cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
    }
    off += v.cols();
    ids.push_back(p.id());
    widths.push_back(v.cols());
  }
  return parts[0].tape().record(std::move(out), parts,
                                [ids, widths](Tape& t, const Tensor& g) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.requires_grad(ids[k])) {
                                      Tensor gk(g.rows(), widths[k]);
                                      for (std::size_t i = 0; i < g.rows(); ++i) {
                                        auto src = g.row(i).subspan(off, widths[k]);
                                        std::copy(src.begin(), src.end(), gk.row(i).begin());
                                      }
                                      t.accumulate(ids[k], gk);
                                    }
                                    off += widths[k];
                                  }
                                });
}

namespace {

// out = a @ x (transpose=false) or aᵀ @ x.
Tensor spmm(const SparseMatrix& a, const Tensor& x, bool transpose) {
  const std::size_t out_rows = transpose ? a.cols : a.rows;
  Tensor out(out_rows, x.cols());
  for (const auto& e : a.entries) {
    const std::size_t dst = transpose ? e.col : e.row;
    const std::size_t src = transpose ? e.row : e.col;
    auto o = out.row(dst);
    auto in = x.row(src);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += e.value * in[j];
  }
  return out;
}

}  // namespace

Var sparse_matmul(const SparseMatrix& a, Var x, bool transpose) {
  const std::size_t inner = transpose ? a.rows : a.cols;
  require(x.value().rows() == inner,
          fmt::format("sparse_matmul: inner dimension {} vs {} rows", inner, x.value().rows()));
  Tensor out = spmm(a, x.value(), transpose);
  const Var inputs[] = {x};
  const auto ix = x.id();
  auto ap = std::make_shared<const SparseMatrix>(a);
  return x.tape().record(std::move(out), inputs, [ix, ap, transpose](Tape& t, const Tensor& g) {
    t.accumulate(ix, spmm(*ap, g, !transpose));
  });
}

Var batch_norm(Var x, BatchNormState& s, Mode mode) {
  const Tensor& xv = x.value();
  const std::size_t a = xv.rows(), p = xv.cols();
  require(s.running_mean.size() == p && s.running_var.size() == p,
          "batch_norm: state width does not match input");
  std::vector<double> mean(p, 0.0), var(p, 0.0);
  if (mode == Mode::Train) {
    if (a < 2) {
      throw BatchTooSmall(fmt::format("batch norm '{}' in train mode needs >= 2 rows, got {}",
                                      s.name, a));
    }
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < p; ++j) mean[j] += xv(i, j);
    }
    for (auto& m : mean) m /= static_cast<double>(a);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        const double d = xv(i, j) - mean[j];
        var[j] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(a);
    for (std::size_t j = 0; j < p; ++j) {
      s.running_mean[j] = (1.0 - s.momentum) * s.running_mean[j] + s.momentum * mean[j];
      s.running_var[j] = (1.0 - s.momentum) * s.running_var[j] + s.momentum * var[j];
    }
  } else {
    mean = s.running_mean;
    var = s.running_var;
  }
  std::vector<double> inv_std(p);
  for (std::size_t j = 0; j < p; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + s.eps);

  Tensor xhat(a, p);
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < p; ++j) xhat(i, j) = (xv(i, j) - mean[j]) * inv_std[j];
  }
  Tape& tape = x.tape();
  std::vector<Var> inputs = {x};
  std::optional<Var> gamma, beta;
  if (s.gamma) inputs.push_back(*(gamma = tape.parameter(*s.gamma)));
  if (s.beta) inputs.push_back(*(beta = tape.parameter(*s.beta)));

  Tensor out = xhat;
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (gamma) out(i, j) *= gamma->value()[j];
      if (beta) out(i, j) += beta->value()[j];
    }
  }
  const auto ix = x.id();
  const std::optional<std::size_t> ig = gamma ? std::optional(gamma->id()) : std::nullopt;
  const std::optional<std::size_t> ib = beta ? std::optional(beta->id()) : std::nullopt;
  return tape.record(
      std::move(out), inputs,
      [ix, ig, ib, mode, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const std::size_t a = g.rows(), p = g.cols();
        if (ig && t.requires_grad(*ig)) {
          Tensor gg(1, p);
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) gg[j] += g(i, j) * xhat(i, j);
          }
          t.accumulate(*ig, gg);
        }
        if (ib && t.requires_grad(*ib)) {
          Tensor gb(1, p);
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) gb[j] += g(i, j);
          }
          t.accumulate(*ib, gb);
        }
        if (!t.requires_grad(ix)) return;
        Tensor dxhat = g;
        if (ig) {
          const Tensor& gv = t.value(*ig);
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) dxhat(i, j) *= gv[j];
          }
        }
        Tensor gx(a, p);
        if (mode == Mode::Eval) {
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) gx(i, j) = dxhat(i, j) * inv_std[j];
          }
        } else {
          std::vector<double> sum_d(p, 0.0), sum_dx(p, 0.0);
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
              sum_d[j] += dxhat(i, j);
              sum_dx[j] += dxhat(i, j) * xhat(i, j);
            }
          }
          const double inv_a = 1.0 / static_cast<double>(a);
          for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
              gx(i, j) = inv_std[j] * inv_a *
                         (static_cast<double>(a) * dxhat(i, j) - sum_d[j] - xhat(i, j) * sum_dx[j]);
            }
          }
        }
        t.accumulate(ix, gx);
      });
}

Var dropout(Var x, double p_drop, Rng& rng, Mode mode) {
  if (mode == Mode::Eval || p_drop <= 0.0) return x;
  if (p_drop >= 1.0) throw ShapeMismatch("dropout probability must be in [0, 1)");
  const Tensor& xv = x.value();
  std::bernoulli_distribution keep(1.0 - p_drop);
  const double s = 1.0 / (1.0 - p_drop);
  std::vector<double> mask(xv.size());
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = keep(rng) ? s : 0.0;
    out[i] *= mask[i];
  }
  const Var inputs[] = {x};
  const auto ix = x.id();
  return x.tape().record(std::move(out), inputs, [ix, mask = std::move(mask)](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask[i];
    t.accumulate(ix, gx);
  });
}

Var segment_pool(Var x, std::span<const std::size_t> offsets, Pool pool) {
  const Tensor& xv = x.value();
  require(offsets.size() >= 2 && offsets.back() == xv.rows(), "segment_pool: offsets do not cover rows");
  const std::size_t segs = offsets.size() - 1, p = xv.cols();
  Tensor out(segs, p);
  std::vector<std::size_t> argmax;
  if (pool == Pool::Max) argmax.assign(segs * p, 0);
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    require(hi > lo, "segment_pool: empty segment");
    for (std::size_t j = 0; j < p; ++j) {
      if (pool == Pool::Max) {
        std::size_t best = lo;
        for (std::size_t i = lo + 1; i < hi; ++i) {
          if (xv(i, j) > xv(best, j)) best = i;
        }
        out(s, j) = xv(best, j);
        argmax[s * p + j] = best;
      } else {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += xv(i, j);
        out(s, j) = pool == Pool::Mean ? acc / static_cast<double>(hi - lo) : acc;
      }
    }
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  const Var inputs[] = {x};
  const auto ix = x.id();
  const std::size_t rows = xv.rows();
  return x.tape().record(
      std::move(out), inputs,
      [ix, rows, pool, offs = std::move(offs), argmax = std::move(argmax)](Tape& t, const Tensor& g) {
        const std::size_t p = g.cols();
        Tensor gx(rows, p);
        for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
          const std::size_t lo = offs[s], hi = offs[s + 1];
          for (std::size_t j = 0; j < p; ++j) {
            if (pool == Pool::Max) {
              gx(argmax[s * p + j], j) += g(s, j);
            } else {
              const double w = pool == Pool::Mean ? 1.0 / static_cast<double>(hi - lo) : 1.0;
              for (std::size_t i = lo; i < hi; ++i) gx(i, j) += w * g(s, j);
            }
          }
        }
        t.accumulate(ix, gx);
      });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  require(targets.size() == lv.rows(), "cross_entropy: target count mismatch");
  Tensor probs = nfgnn::softmax_rows(lv);
  double loss = 0.0;
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    const int tcls = targets[i];
    require(tcls >= 0 && static_cast<std::size_t>(tcls) < lv.cols(), "cross_entropy: target out of range");
    auto r = lv.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    loss += (mx + std::log(s)) - r[static_cast<std::size_t>(tcls)];
  }
  const double n = static_cast<double>(lv.rows());
  std::vector<int> tg(targets.begin(), targets.end());
  const Var inputs[] = {logits};
  const auto il = logits.id();
  return logits.tape().record(
      Tensor(1, 1, loss / n), inputs,
      [il, n, probs = std::move(probs), tg = std::move(tg)](Tape& t, const Tensor& g) {
        Tensor gx = probs;
        for (std::size_t i = 0; i < gx.rows(); ++i) gx(i, static_cast<std::size_t>(tg[i])) -= 1.0;
        for (auto& v : gx.data()) v *= g[0] / n;
        t.accumulate(il, gx);
      });
}

}  // namespace ad

SparseMatrix dropout_entries(const SparseMatrix& m, double p_drop, Rng& rng) {
  if (p_drop <= 0.0) return m;
  std::bernoulli_distribution keep(1.0 - p_drop);
  const double s = 1.0 / (1.0 - p_drop);
  SparseMatrix out{m.rows, m.cols, {}};
  out.entries.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    if (keep(rng)) out.entries.push_back({e.row, e.col, e.value * s});
  }
  return out;
}

}  // namespace nfgnn
