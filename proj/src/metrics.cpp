#include "nfgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace nfgnn {

std::vector<ClassScores> per_class_scores(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("y_true and y_pred differ in length");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<int, Counts> counts;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) {
      ++counts[y_true[i]].tp;
    } else {
      ++counts[y_true[i]].fn;
      ++counts[y_pred[i]].fp;
    }
  }
  std::vector<ClassScores> out;
  for (const auto& [label, c] : counts) {
    ClassScores s;
    s.label = label;
    s.support = c.tp + c.fn;
    s.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    s.recall = s.support == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(s.support);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    out.push_back(s);
  }
  return out;
}

double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("weighted_f1 of an empty set");
  double acc = 0.0;
  for (const auto& s : per_class_scores(y_true, y_pred)) acc += s.f1 * static_cast<double>(s.support);
  return acc / static_cast<double>(y_true.size());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive ranks with ties sharing their average rank (1-based).
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auroc needs both positive and negative labels");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return {m, std::sqrt(s / static_cast<double>(values.size()))};
}

}  // namespace nfgnn
