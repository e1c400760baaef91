#include "nfgnn/mlp.hpp"

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

MlpModel::MlpModel(const MlpConfig& config, std::uint64_t init_seed) : config_(config) {
  if (config_.num_layers != 1 && config_.num_layers != 2) {
    throw ConfigError(fmt::format("num_layers must be 1 or 2, got {}", config_.num_layers));
  }
  if (config_.num_hidden <= 0 || config_.in_features == 0) throw ConfigError("invalid MLP widths");
  Rng rng(init_seed);
  const std::size_t h = static_cast<std::size_t>(config_.num_hidden);
  const bool oc = config_.variant == Variant::OneClass;
  int k = 0;
  auto add = [&](std::size_t in, std::size_t out, bool relu) {
    BlockSpec s;
    s.name = fmt::format("dense{}", k++);
    s.in = in;
    s.out = out;
    s.bias = !oc;
    s.batch_norm = false;
    s.relu = relu;
    layers_.push_back(store_.make_block(s, rng));
  };
  switch (config_.variant) {
    case Variant::Classifier:
      add(config_.in_features, h, true);
      if (config_.num_layers == 2) add(h, h, true);
      add(h, config_.num_classes, false);
      break;
    case Variant::Autoencoder:
      if (config_.num_layers == 2) {
        add(config_.in_features, 2 * h, true);
        add(2 * h, h, true);
        add(h, 2 * h, true);
        add(2 * h, config_.in_features, false);
      } else {
        add(config_.in_features, h, true);
        add(h, config_.in_features, false);
      }
      break;
    case Variant::OneClass:
      if (config_.num_layers == 2) {
        add(config_.in_features, h, true);
        add(h, h, false);
      } else {
        add(config_.in_features, h, false);
      }
      break;
  }
}

ad::Var MlpModel::forward(ad::Tape& tape, const Tensor& x, Mode mode, Rng& rng) {
  if (x.cols() != config_.in_features) {
    throw ShapeMismatch(fmt::format("MLP expects {} features, got {}", config_.in_features, x.cols()));
  }
  ad::Var h = tape.constant(x);
  for (const auto& l : layers_) h = l.forward(h, mode, rng, 0.0);
  return h;
}

ad::Var MlpModel::loss(ad::Tape& tape, const Tensor& x, std::span<const int> targets, Mode mode, Rng& rng) {
  ad::Var out = forward(tape, x, mode, rng);
  const double n = static_cast<double>(x.rows());
  ad::Var data;
  switch (config_.variant) {
    case Variant::Classifier:
      data = ad::cross_entropy(out, targets);
      break;
    case Variant::Autoencoder:
      data = ad::scale(ad::sum_all(ad::square(ad::sub(out, tape.constant(x)))), 1.0 / n);
      break;
    case Variant::OneClass:
      if (!center_) throw ConfigError("one-class center has not been initialized");
      data = ad::scale(ad::sum_all(ad::square(ad::sub_row(out, *center_))), 1.0 / n);
      break;
  }
  if (config_.l2 == 0.0) return data;
  const auto ws = store_.weights();
  return ad::add(data, l2_penalty(tape, ws, config_.l2));
}

void MlpModel::init_center(const Tensor& x) {
  ad::Tape tape;
  Rng rng(0);
  const Tensor& h = forward(tape, x, Mode::Eval, rng).value();
  Tensor mu(1, h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) mu[j] += h(i, j);
  }
  for (auto& v : mu.data()) v /= static_cast<double>(h.rows());
  center_ = std::move(mu);
}

Tensor MlpModel::predict_proba(const Tensor& x) {
  if (config_.variant != Variant::Classifier) throw ConfigError("predict_proba needs the classifier variant");
  ad::Tape tape;
  Rng rng(0);
  return softmax_rows(forward(tape, x, Mode::Eval, rng).value());
}

std::vector<double> MlpModel::anomaly_scores(const Tensor& x) {
  ad::Tape tape;
  Rng rng(0);
  const Tensor& out = forward(tape, x, Mode::Eval, rng).value();
  std::vector<double> scores(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double d = 0.0;
      if (config_.variant == Variant::Autoencoder) {
        d = x(i, j) - out(i, j);
      } else if (config_.variant == Variant::OneClass) {
        if (!center_) throw ConfigError("one-class center has not been initialized");
        d = out(i, j) - (*center_)[j];
      } else {
        throw ConfigError("anomaly scores need the autoencoder or one-class variant");
      }
      s += d * d;
    }
    scores[i] = s;
  }
  return scores;
}

}  // namespace nfgnn
