#include "nfgnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nfgnn/errors.hpp"

namespace nfgnn {

ad::Var DenseBlock::forward(ad::Var x, Mode mode, Rng& rng, double dropout_p) const {
  ad::Tape& t = x.tape();
  ad::Var h = ad::dropout(x, dropout_p, rng, mode);
  h = ad::matmul(h, t.parameter(*weight));
  if (bias) h = ad::add_row(h, t.parameter(*bias));
  if (bn) h = ad::batch_norm(h, *bn, mode);
  if (relu) h = ad::relu(h);
  return h;
}

DenseBlock ModuleStore::make_block(const BlockSpec& spec, Rng& rng) {
  DenseBlock b;
  const double limit = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor w(spec.in, spec.out);
  for (auto& v : w.data()) v = u(rng);
  b.weight = &params_.add(spec.name + ".weight", std::move(w));
  if (spec.bias) b.bias = &params_.add(spec.name + ".bias", Tensor(1, spec.out));
  if (spec.batch_norm) {
    auto bn = std::make_unique<BatchNormState>();
    bn->name = spec.name + ".bn";
    bn->running_mean.assign(spec.out, 0.0);
    bn->running_var.assign(spec.out, 1.0);
    if (spec.bn_affine) {
      bn->gamma = &params_.add(spec.name + ".bn.gamma", Tensor(1, spec.out, 1.0));
      bn->beta = &params_.add(spec.name + ".bn.beta", Tensor(1, spec.out));
    }
    b.bn = bn.get();
    bns_.push_back(std::move(bn));
  }
  b.relu = spec.relu;
  return b;
}

std::vector<BatchNormState*> ModuleStore::batch_norms() const {
  std::vector<BatchNormState*> out;
  for (const auto& b : bns_) out.push_back(b.get());
  return out;
}

ModuleStore::State ModuleStore::snapshot() const {
  State s;
  s.params = params_.snapshot();
  for (const auto& b : bns_) {
    s.running_mean.push_back(b->running_mean);
    s.running_var.push_back(b->running_var);
  }
  return s;
}

void ModuleStore::restore(const State& s) {
  params_.restore(s.params);
  if (s.running_mean.size() != bns_.size()) throw ShapeMismatch("batch-norm snapshot size mismatch");
  for (std::size_t i = 0; i < bns_.size(); ++i) {
    bns_[i]->running_mean = s.running_mean[i];
    bns_[i]->running_var = s.running_var[i];
  }
}

std::vector<Parameter*> ModuleStore::weights() const {
  std::vector<Parameter*> out;
  for (Parameter* p : params_.all()) {
    if (p->name.ends_with(".weight")) out.push_back(p);
  }
  return out;
}

void adam_step(std::span<Parameter* const> params, AdamState& s) {
  if (s.m.size() != params.size()) {
    s.m.clear();
    s.v.clear();
    for (const Parameter* p : params) {
      s.m.emplace_back(p->value.rows(), p->value.cols());
      s.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.grad.same_shape(p.value)) throw ShapeMismatch("gradient shape mismatch for " + p.name);
    Tensor& m = s.m[k];
    Tensor& v = s.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

ad::Var l2_penalty(ad::Tape& tape, std::span<Parameter* const> weights, double lambda) {
  ad::Var total = tape.constant(Tensor(1, 1));
  for (Parameter* w : weights) total = ad::add(total, ad::sum_all(ad::square(tape.parameter(*w))));
  return ad::scale(total, 0.5 * lambda);
}

GradCheckReport finite_difference_check(const std::function<ad::Var(ad::Tape&)>& model_fn,
                                        std::span<Parameter* const> params,
                                        const GradCheckOptions& opts) {
  {
    ad::Tape tape;
    ad::Var loss = model_fn(tape);
    tape.backward(loss);
  }
  struct Coord {
    Parameter* p;
    std::size_t i;
  };
  std::vector<Coord> coords;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) coords.push_back({p, i});
  }
  if (coords.size() > opts.max_coords) {
    Rng rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coords);
  }
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (const auto& c : coords) analytic.push_back(c.p->grad[c.i]);

  auto eval = [&] {
    ad::Tape tape;
    return model_fn(tape).value()[0];
  };
  GradCheckReport report;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    double& w = coords[k].p->value[coords[k].i];
    const double orig = w;
    w = orig + opts.h;
    const double fp = eval();
    w = orig - opts.h;
    const double fm = eval();
    w = orig;
    const double numeric = (fp - fm) / (2.0 * opts.h);
    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    report.entries.push_back({coords[k].p->name, coords[k].i, a, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.passed = report.max_rel_error < opts.tol;
  return report;
}

}  // namespace nfgnn
