#pragma once

#include <span>
#include <vector>

namespace nfgnn {

struct ClassScores {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Precision/recall/F1 for every class that occurs in y_true or y_pred,
/// ordered by class label.
std::vector<ClassScores> per_class_scores(std::span<const int> y_true, std::span<const int> y_pred);

/// Support-weighted mean of per-class F1; F1 is 0 when precision + recall = 0.
double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred);

/// Exact AUROC via average ranks: P(score_pos > score_neg) + 0.5 P(tie).
/// labels are 1 for positives, 0 for negatives. Throws std::invalid_argument
/// when either class is missing.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(std::span<const double> values);

}  // namespace nfgnn
