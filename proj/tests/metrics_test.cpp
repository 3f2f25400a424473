#include "size2depth/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

namespace size2depth {
namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = 0.5, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

TEST(SamplePoints, ExhaustiveSampleCoversEveryPixel) {
  const auto pts = sample_points(9, 12, 4, 3);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : pts) seen.insert({p.x, p.y});
  EXPECT_EQ(seen.size(), 12u);
}

TEST(SamplePoints, DeterministicPerSeed) {
  EXPECT_EQ(sample_points(77, 10, 84, 63), sample_points(77, 10, 84, 63));
  EXPECT_NE(sample_points(77, 10, 84, 63), sample_points(78, 10, 84, 63));
}

TEST(SamplePoints, TenDistinctPointsAtWorkingResolution) {
  const auto pts = sample_points(1, kDefaultEvalPoints, 84, 63);
  ASSERT_EQ(pts.size(), 10u);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : pts) {
    EXPECT_GE(p.x, 0);
    EXPECT_LT(p.x, 84);
    EXPECT_GE(p.y, 0);
    EXPECT_LT(p.y, 63);
    seen.insert({p.x, p.y});
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(SamplePoints, RejectsTooManyPoints) {
  try {
    sample_points(1, 13, 4, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
}

TEST(Evaluate, IdentityIsPerfect) {
  std::mt19937_64 rng(1);
  const auto gt = random_vector(rng, 10);
  const auto m = evaluate(gt, gt);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.cosine_similarity, 1.0);
  EXPECT_EQ(m.pairwise_rank_accuracy, 1.0);
  EXPECT_EQ(m.n_points, 10u);
}

TEST(Evaluate, ScaledPredictionKeepsCosineAndRank) {
  std::mt19937_64 rng(2);
  const auto gt = random_vector(rng, 10);
  std::vector<double> pred;
  for (double v : gt) pred.push_back(2.0 * v);
  const auto m = evaluate(pred, gt);
  EXPECT_DOUBLE_EQ(m.cosine_similarity, 1.0);
  EXPECT_EQ(m.pairwise_rank_accuracy, 1.0);
  EXPECT_NEAR(m.mse, 0.0, 1e-15);  // min-max normalisation removes scale
}

TEST(Evaluate, OneDiscordantPairOfThree) {
  const auto m = evaluate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
  EXPECT_EQ(m.pairwise_rank_accuracy, 2.0 / 3.0);
}

TEST(Evaluate, TiesCountAsConcordant) {
  const auto m = evaluate(std::vector<double>{4, 4, 4, 4}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(m.pairwise_rank_accuracy, 1.0);
}

TEST(Evaluate, MseUsesMinMaxNormalisedDepths) {
  // normalised pred (0, 0.5, 1) vs gt (0, 1, 0.5): mse = (0 + 0.25 + 0.25) / 3
  const auto m = evaluate(std::vector<double>{2, 4, 6}, std::vector<double>{10, 30, 20});
  EXPECT_DOUBLE_EQ(m.mse, 0.5 / 3.0);
}

TEST(Evaluate, InvarianceProperties) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto pred = random_vector(rng, 12);
    const auto gt = random_vector(rng, 12);
    const auto base = evaluate(pred, gt);

    std::vector<double> scaled, warped;
    const double c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    for (double v : pred) {
      scaled.push_back(c * v);
      warped.push_back(std::exp(v) + 3.0 * v);  // strictly increasing
    }
    EXPECT_NEAR(evaluate(scaled, gt).cosine_similarity, base.cosine_similarity, 1e-12);
    EXPECT_EQ(evaluate(scaled, gt).pairwise_rank_accuracy, base.pairwise_rank_accuracy);
    EXPECT_EQ(evaluate(warped, gt).pairwise_rank_accuracy, base.pairwise_rank_accuracy);

    const auto swapped = evaluate(gt, pred);
    EXPECT_DOUBLE_EQ(swapped.mse, base.mse);
    EXPECT_EQ(swapped.pairwise_rank_accuracy, base.pairwise_rank_accuracy);
    EXPECT_GE(base.pairwise_rank_accuracy, 0.0);
    EXPECT_LE(base.pairwise_rank_accuracy, 1.0);
  }
}

TEST(Evaluate, ZeroVectorFlagsCosineUndefined) {
  const auto m = evaluate(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3});
  EXPECT_FALSE(m.cosine_defined);
  EXPECT_TRUE(evaluate(std::vector<double>{1, 0, 0}, std::vector<double>{1, 2, 3}).cosine_defined);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(evaluate(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
}

TEST(Gather, ReadsRowMajorField) {
  const std::vector<double> field{0, 1, 2, 3, 4, 5};  // 3 wide
  const std::vector<PixelCoord> pts{{2, 1}, {0, 0}, {1, 1}};
  EXPECT_EQ(gather(field, 3, pts), (std::vector<double>{5, 0, 4}));
}

}  // namespace
}  // namespace size2depth
