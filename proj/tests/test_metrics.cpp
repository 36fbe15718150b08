#include <random>

#include <gtest/gtest.h>

#include "smoothsense/metrics.hpp"

#include "oracles.hpp"
#include "property_checks.hpp"

using namespace smoothsense;

using Labels = std::vector<int>;

TEST(Accuracy, Examples) {
  EXPECT_EQ(clustering_accuracy(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(clustering_accuracy(Labels{0, 1, 0, 1}, Labels{0, 0, 1, 1}), 0.5);
  EXPECT_EQ(oracle::brute_force_accuracy(Labels{0, 1, 0, 1}, Labels{0, 0, 1, 1}), 0.5);
  EXPECT_EQ(clustering_accuracy(Labels{2, 0, 1, 1}, Labels{2, 0, 1, 1}), 1.0);
}

TEST(Accuracy, UnequalClusterCounts) {
  // Extra predicted cluster stays unmatched and counts as error.
  EXPECT_DOUBLE_EQ(clustering_accuracy(Labels{0, 0, 1, 2}, Labels{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(clustering_accuracy(Labels{0, 0, 0, 0}, Labels{0, 0, 1, 1}), 0.5);
}

TEST(Accuracy, LengthMismatchAndEmpty) {
  EXPECT_THROW(clustering_accuracy(Labels{0, 1}, Labels{0}), dimension_mismatch);
  EXPECT_THROW(clustering_accuracy(Labels{}, Labels{}), invalid_input);
}

TEST(Nmi, Examples) {
  EXPECT_NEAR(nmi(Labels{0, 0, 1, 1, 2}, Labels{1, 1, 2, 2, 0}), 1.0, 1e-15);
  EXPECT_NEAR(nmi(Labels{0, 1, 0, 1}, Labels{0, 0, 1, 1}), 0.0, 1e-15);
}

TEST(Nmi, RandomMatchesContingencyOracle) {
  std::mt19937_64 rng(111);
  std::uniform_int_distribution<int> a(0, 3), b(0, 4);
  Labels p(60), t(60);
  for (auto& v : p) v = a(rng);
  for (auto& v : t) v = b(rng);
  EXPECT_NEAR(nmi(p, t), oracle::contingency_nmi(p, t), 1e-12);
  EXPECT_NEAR(nmi(p, t, NmiNormalization::arithmetic), oracle::contingency_nmi(p, t, true), 1e-12);
}

TEST(Nmi, SymmetricAndBounded) {
  std::mt19937_64 rng(113);
  std::uniform_int_distribution<int> a(0, 2);
  for (int t = 0; t < 50; ++t) {
    Labels x(20), y(20);
    for (auto& v : x) v = a(rng);
    for (auto& v : y) v = a(rng);
    const double xy = nmi(x, y), yx = nmi(y, x);
    EXPECT_NEAR(xy, yx, 1e-15);
    EXPECT_GE(xy, 0.0);
    EXPECT_LE(xy, 1.0);
  }
}

TEST(Nmi, TrivialPartitions) {
  EXPECT_EQ(nmi(Labels{0, 0, 0}, Labels{1, 1, 1}), 1.0);
  EXPECT_EQ(nmi(Labels{0, 0, 0}, Labels{0, 1, 2}), 0.0);
}

TEST(MacroF1, Examples) {
  EXPECT_EQ(macro_f1(Labels{1, 1, 0, 0, 2}, Labels{0, 0, 1, 1, 2}), 1.0);
  // One class left without a matched cluster contributes 0.
  EXPECT_NEAR(macro_f1(Labels{0, 0, 0, 0, 1, 1}, Labels{0, 0, 1, 1, 2, 2}), 5.0 / 9.0, 1e-15);
}

TEST(MacroF1, ThreeClassesOneSwap) {
  const Labels truth = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const Labels pred = {0, 0, 1, 1, 1, 1, 2, 2, 2};
  const double f0 = 2.0 * 1.0 * (2.0 / 3.0) / (1.0 + 2.0 / 3.0);
  const double f1 = 2.0 * 0.75 * 1.0 / 1.75;
  EXPECT_NEAR(macro_f1(pred, truth), (f0 + f1 + 1.0) / 3.0, 1e-15);
}

TEST(Metrics, PermutationInvariance) {
  std::mt19937_64 rng(115);
  std::uniform_int_distribution<int> a(0, 3);
  Labels p(40), t(40);
  for (auto& v : p) v = a(rng);
  for (auto& v : t) v = a(rng);
  const int perm[4] = {2, 0, 3, 1};
  Labels q(40);
  for (std::size_t i = 0; i < 40; ++i) q[i] = perm[p[i]] + 10;
  EXPECT_DOUBLE_EQ(clustering_accuracy(p, t), clustering_accuracy(q, t));
  EXPECT_NEAR(nmi(p, t), nmi(q, t), 1e-15);
  EXPECT_DOUBLE_EQ(macro_f1(p, t), macro_f1(q, t));
}

TEST(Metrics, PerfectAccuracyIffRelabeling) {
  std::mt19937_64 rng(117);
  std::uniform_int_distribution<int> a(0, 2);
  for (int t = 0; t < 100; ++t) {
    Labels p(8), q(8);
    for (auto& v : p) v = a(rng);
    for (auto& v : q) v = a(rng);
    bool relabel = true;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        if ((p[i] == p[j]) != (q[i] == q[j])) relabel = false;
    EXPECT_EQ(clustering_accuracy(p, q) == 1.0, relabel);
  }
}

TEST(Metrics, OracleProperty) {
  const auto r = checks::metric_oracles(300);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Hungarian, KnownAssignment) {
  const std::vector<std::vector<double>> cost = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto a = hungarian(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) total += cost[i][static_cast<std::size_t>(a[i])];
  EXPECT_EQ(total, 5.0);
}
