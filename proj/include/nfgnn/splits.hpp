#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nfgnn/flow_ingest.hpp"

namespace nfgnn {

struct SplitPlan {
  std::uint64_t seed = 0;
  LabelLevel label_level = LabelLevel::Binary;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SupervisedSplitOptions {
  // Per-class training quota; 0 selects the level default (100 / 25 / 5).
  std::size_t quota = 0;
  // Validation share of the non-training samples; < 0 selects 5% (binary,
  // category) or 20% (family).
  double val_fraction = -1.0;
};

std::size_t default_quota(LabelLevel level);
double default_val_fraction(LabelLevel level);

/// Balanced per-class training quota, then a stratified validation share of
/// the rest; everything else is test. class_of[i] < 0 excludes sample i.
/// Throws InsufficientClassSize when a class has fewer samples than the quota.
SplitPlan supervised_split(std::span<const int> class_of, LabelLevel level, std::uint64_t seed,
                           const SupervisedSplitOptions& opts = {});

/// Stratified train share (default 20%), then a stratified 10% of the rest
/// for validation. Stratified by the binary label.
SplitPlan unsupervised_split(std::span<const int> binary_labels, std::uint64_t seed, double train_fraction = 0.20,
                             double val_fraction = 0.10);

/// Largest-remainder apportionment of round(fraction * total) over classes.
/// Ties in the remainder go to the lower class position.
std::vector<std::size_t> apportion(std::span<const std::size_t> class_sizes, double fraction);

}  // namespace nfgnn
