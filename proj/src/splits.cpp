#include "nfgnn/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"
#include "nfgnn/rng.hpp"

namespace nfgnn {

std::size_t default_quota(LabelLevel level) {
  switch (level) {
    case LabelLevel::Binary: return 100;
    case LabelLevel::Category: return 25;
    case LabelLevel::Family: return 5;
  }
  return 0;
}

double default_val_fraction(LabelLevel level) { return level == LabelLevel::Family ? 0.20 : 0.05; }

std::vector<std::size_t> apportion(std::span<const std::size_t> class_sizes, double fraction) {
  const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> out(class_sizes.size());
  std::vector<double> rem(class_sizes.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(class_sizes[c]);
    out[c] = std::min(class_sizes[c], static_cast<std::size_t>(std::floor(exact)));
    rem[c] = exact - static_cast<double>(out[c]);
    assigned += out[c];
  }
  std::vector<std::size_t> order(class_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
    const std::size_t c = order[k];
    if (out[c] < class_sizes[c]) {
      ++out[c];
      ++assigned;
    }
  }
  return out;
}

namespace {

using ClassBuckets = std::map<int, std::vector<std::size_t>>;

ClassBuckets shuffled_buckets(std::span<const int> class_of, Rng& rng) {
  ClassBuckets b;
  for (std::size_t i = 0; i < class_of.size(); ++i) {
    if (class_of[i] >= 0) b[class_of[i]].push_back(i);
  }
  for (auto& [c, idx] : b) std::shuffle(idx.begin(), idx.end(), rng);
  return b;
}

// Moves a stratified share of every bucket's front into out and erases it from the bucket.
void take_stratified(ClassBuckets& buckets, double fraction, std::vector<std::size_t>& out) {
  std::vector<std::size_t> sizes;
  for (const auto& [c, idx] : buckets) sizes.push_back(idx.size());
  const auto counts = apportion(sizes, fraction);
  std::size_t k = 0;
  for (auto& [c, idx] : buckets) {
    const auto n = static_cast<std::ptrdiff_t>(counts[k++]);
    out.insert(out.end(), idx.begin(), idx.begin() + n);
    idx.erase(idx.begin(), idx.begin() + n);
  }
}

void finish(SplitPlan& plan, ClassBuckets& rest) {
  for (auto& [c, idx] : rest) plan.test.insert(plan.test.end(), idx.begin(), idx.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.val.begin(), plan.val.end());
  std::sort(plan.test.begin(), plan.test.end());
}

}  // namespace

SplitPlan supervised_split(std::span<const int> class_of, LabelLevel level, std::uint64_t seed,
                           const SupervisedSplitOptions& opts) {
  const std::size_t quota = opts.quota > 0 ? opts.quota : default_quota(level);
  const double val_fraction = opts.val_fraction >= 0.0 ? opts.val_fraction : default_val_fraction(level);
  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.label_level = level;
  ClassBuckets buckets = shuffled_buckets(class_of, rng);
  for (auto& [c, idx] : buckets) {
    if (idx.size() < quota) {
      throw InsufficientClassSize(fmt::format("{} class {} has {} samples, training quota is {}", to_string(level),
                                              c, idx.size(), quota));
    }
    plan.train.insert(plan.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota));
    idx.erase(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  take_stratified(buckets, val_fraction, plan.val);
  finish(plan, buckets);
  return plan;
}

SplitPlan unsupervised_split(std::span<const int> binary_labels, std::uint64_t seed, double train_fraction,
                             double val_fraction) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0) throw ConfigError("train_fraction must be in (0, 1)");
  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.label_level = LabelLevel::Binary;
  ClassBuckets buckets = shuffled_buckets(binary_labels, rng);
  take_stratified(buckets, train_fraction, plan.train);
  take_stratified(buckets, val_fraction, plan.val);
  finish(plan, buckets);
  return plan;
}

}  // namespace nfgnn
