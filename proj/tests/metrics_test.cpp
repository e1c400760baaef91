#include <gtest/gtest.h>

#include <stdexcept>

#include "nfgnn/metrics.hpp"
#include "support.hpp"

namespace nfgnn {
namespace {

TEST(WeightedF1, Examples) {
  const std::vector<int> y = {0, 0, 1}, p = {0, 1, 1};
  EXPECT_DOUBLE_EQ(weighted_f1(y, p), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(weighted_f1(y, y), 1.0);
  const std::vector<int> yb = {0, 0, 1, 1}, all0 = {0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(weighted_f1(yb, all0), 1.0 / 3.0);
}

TEST(WeightedF1, PerClassScores) {
  const std::vector<int> y = {0, 0, 1, 2}, p = {0, 1, 1, 1};
  const auto s = per_class_scores(y, p);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(s[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(s[1].precision, 1.0 / 3.0);
  EXPECT_EQ(s[2].support, 1u);
  EXPECT_EQ(s[2].f1, 0.0);
}

TEST(WeightedF1, MatchesConfusionMatrixOracle) {
  Rng rng(31);
  for (int t = 0; t < 1000; ++t) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    std::uniform_int_distribution<int> cls(0, k - 1);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = cls(rng);
      p[i] = cls(rng);
    }
    EXPECT_NEAR(weighted_f1(y, p), testing::brute_weighted_f1(y, p), 1e-12);
  }
}

TEST(Auroc, Examples) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc(s, y), 0.75);
  const std::vector<double> sep = {0.1, 0.2, 0.9, 0.95};
  EXPECT_DOUBLE_EQ(auroc(sep, y), 1.0);
  const std::vector<double> flat = {3, 3, 3, 3};
  EXPECT_DOUBLE_EQ(auroc(flat, y), 0.5);
}

TEST(Auroc, SingleClassThrows) {
  const std::vector<double> s = {0.1, 0.2};
  const std::vector<int> y = {1, 1};
  EXPECT_THROW(auroc(s, y), std::invalid_argument);
}

TEST(Auroc, MatchesPairwiseOracle) {
  Rng rng(32);
  for (int t = 0; t < 1000; ++t) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    std::vector<int> y(n);
    std::vector<double> s(n);
    std::uniform_int_distribution<int> bit(0, 1), level(0, 4);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = bit(rng);
      s[i] = 0.25 * level(rng);  // coarse levels force ties
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(auroc(s, y), testing::brute_auroc(s, y), 1e-12);
  }
}

TEST(MeanStd, Population) {
  const std::vector<double> v = {1.0, 3.0};
  const auto ms = mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.std, 1.0);
  const std::vector<double> one = {0.7};
  EXPECT_EQ(mean_std(one).std, 0.0);
}

}  // namespace
}  // namespace nfgnn
