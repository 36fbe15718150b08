#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "smoothsense/losses.hpp"

#include "oracles.hpp"
#include "property_checks.hpp"

using namespace smoothsense;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

const Matrix kLayout = rows({{0, 0}, {0, 1}, {5, 0}, {5, 1}});
const std::vector<int> kSplit = {0, 0, 1, 1};
const double kLayoutSep = (10.0 + 2.0 * std::sqrt(26.0)) / 2.0;

}  // namespace

TEST(NodeTightness, Examples) {
  const Matrix x = rows({{0, 0}, {0, 1}});
  const std::vector<int> one = {0, 0};
  EXPECT_DOUBLE_EQ(*node_tightness(x, one, 0), 1.0);
  EXPECT_DOUBLE_EQ(*node_tightness(x, one, 1), 1.0);
  EXPECT_DOUBLE_EQ(*node_tightness(Matrix::Ones(3, 2), std::vector<int>{0, 0, 0}, 1), 0.0);
  const Matrix tri = rows({{0, 0}, {3, 0}, {0, 4}});
  EXPECT_DOUBLE_EQ(*node_tightness(tri, std::vector<int>{0, 0, 0}, 0), 3.5);
}

TEST(NodeTightness, SingletonHasNoValue) {
  EXPECT_FALSE(node_tightness(kLayout, std::vector<int>{0, 0, 0, 1}, 3).has_value());
}

TEST(NodeSeparation, Examples) {
  const Matrix x = rows({{0, 0}, {0, 1}, {3, 4}});
  EXPECT_DOUBLE_EQ(node_separation(x, std::vector<int>{0, 0, 1}, 0), 5.0);
  // Node 0 at the origin, every foreign node at distance 2.
  const Matrix ring = rows({{0, 0}, {0.1, 0}, {2, 0}, {0, 2}, {-2, 0}});
  EXPECT_DOUBLE_EQ(node_separation(ring, std::vector<int>{0, 0, 1, 1, 2}, 0), 2.0);
}

TEST(NodeSeparation, HandLayoutMatchesEnumeration) {
  for (Index i = 0; i < 4; ++i) {
    double expect = 0.0;
    int count = 0;
    for (Index j = 0; j < 4; ++j) {
      if (kSplit[static_cast<std::size_t>(j)] == kSplit[static_cast<std::size_t>(i)]) continue;
      expect += (kLayout.row(i) - kLayout.row(j)).norm();
      ++count;
    }
    EXPECT_NEAR(node_separation(kLayout, kSplit, i), expect / count, 1e-15);
  }
}

TEST(NodeSeparation, NeedsTwoClusters) {
  EXPECT_THROW(node_separation(kLayout, std::vector<int>{0, 0, 0, 0}, 0), invalid_input);
}

TEST(LossTightness, Examples) {
  EXPECT_NEAR(loss_tightness(kLayout, kSplit, 2), 1.0, 1e-15);
  EXPECT_EQ(loss_tightness(Matrix::Ones(4, 2), kSplit, 2), 0.0);
  EXPECT_NEAR(loss_tightness(rows({{0, 0}, {0, 2}}), std::vector<int>{0, 0}, 1), 2.0, 1e-15);
}

TEST(LossTightness, SingletonsContributeZero) {
  const Matrix x = rows({{0, 0}, {0, 1}, {9, 9}});
  const auto v = evaluate_loss(x, std::vector<int>{0, 0, 1}, 2, 1.0, 0.0, false);
  EXPECT_EQ(v.singleton_clusters, 1u);
  EXPECT_NEAR(v.tightness, 0.5, 1e-15);  // (1 + 0) over two non-empty clusters
}

TEST(LossSeparation, Examples) {
  EXPECT_NEAR(loss_separation(kLayout, kSplit, 2), kLayoutSep, 1e-12);
  EXPECT_NEAR(loss_separation(kLayout, kSplit, 2), 10.099, 5e-4);
  EXPECT_EQ(loss_separation(Matrix::Ones(4, 2), kSplit, 2), 0.0);
  EXPECT_NEAR(loss_separation(2.0 * kLayout, kSplit, 2), 2.0 * kLayoutSep, 1e-12);
}

TEST(LossTerms, MatchEnumerationOracle) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> cl(0, 2);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = oracle::random_matrix(15, 3, rng);
    std::vector<int> a(15);
    for (int& v : a) v = cl(rng);
    a[0] = 0, a[1] = 1, a[2] = 2;
    const auto [tig, sep] = oracle::enumerate_losses(x, a);
    EXPECT_NEAR(loss_tightness(x, a, 3), tig, 1e-12);
    EXPECT_NEAR(loss_separation(x, a, 3), sep, 1e-12);
  }
}

TEST(CombinedLoss, Examples) {
  EXPECT_NEAR(combined_loss(kLayout, kSplit, 2, 1.0, 1.0), 1.0 + 1.0 / kLayoutSep, 1e-12);
  EXPECT_NEAR(combined_loss(kLayout, kSplit, 2, 1.0, 1.0), 1.0990, 1e-4);
  EXPECT_NEAR(combined_loss(kLayout, kSplit, 2, 2.5, 0.0), 2.5, 1e-12);
  // lambda_tig = 0: the loss shrinks toward zero as separation grows.
  const double near = combined_loss(kLayout, kSplit, 2, 0.0, 1.0);
  const double far = combined_loss(1000.0 * kLayout, kSplit, 2, 0.0, 1.0);
  EXPECT_LT(far, near / 999.0);
}

TEST(CombinedLoss, CollapseIsAnError) {
  EXPECT_THROW(combined_loss(Matrix::Ones(4, 2), kSplit, 2, 1.0, 1.0), degenerate_separation);
  EXPECT_NO_THROW(combined_loss(Matrix::Ones(4, 2), kSplit, 2, 1.0, 0.0));
}

TEST(CombinedLoss, DecomposesIntoTerms) {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 10; ++t) {
    const Matrix x = oracle::random_matrix(12, 4, rng);
    std::vector<int> a = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    std::shuffle(a.begin(), a.end(), rng);
    const double lt = 0.7 + t, ls = 3.0 / (t + 1);
    const double expect = lt * loss_tightness(x, a, 3) + ls / loss_separation(x, a, 3);
    EXPECT_NEAR(combined_loss(x, a, 3, lt, ls), expect, 1e-12);
  }
}

TEST(CombinedLoss, SeparationWeightScalesSecondTerm) {
  const double one = combined_loss(kLayout, kSplit, 2, 0.0, 1.0);
  EXPECT_NEAR(combined_loss(kLayout, kSplit, 2, 0.0, 2.0), 2.0 * one, 1e-15);
}

TEST(Losses, TranslationInvariant) {
  std::mt19937_64 rng(55);
  const Matrix x = oracle::random_matrix(10, 3, rng);
  const std::vector<int> a = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  Matrix shifted = x;
  shifted.rowwise() += Eigen::RowVector3d(4.0, -2.0, 7.5);
  EXPECT_NEAR(loss_tightness(shifted, a, 3), loss_tightness(x, a, 3), 1e-12);
  EXPECT_NEAR(loss_separation(shifted, a, 3), loss_separation(x, a, 3), 1e-12);
}

TEST(Losses, RejectsBadPartitions) {
  EXPECT_THROW(loss_tightness(kLayout, std::vector<int>{0, 1}, 2), dimension_mismatch);
  EXPECT_THROW(loss_tightness(kLayout, std::vector<int>{0, 0, 1, 2}, 2), invalid_input);
  EXPECT_THROW(evaluate_loss(kLayout, kSplit, 2, -1.0, 1.0), invalid_input);
}

TEST(Losses, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(57);
  Matrix x = oracle::random_matrix(9, 3, rng);
  const std::vector<int> a = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const auto v = evaluate_loss(x, a, 3, 1.3, 2.1, true);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + 1e-6;
      const double up = combined_loss(x, a, 3, 1.3, 2.1);
      x(i, j) = keep - 1e-6;
      const double down = combined_loss(x, a, 3, 1.3, 2.1);
      x(i, j) = keep;
      EXPECT_NEAR(v.gradient(i, j), (up - down) / 2e-6, 1e-7);
    }
  }
}

TEST(PairSampling, UnbiasedOnFiftyNodes) {
  std::mt19937_64 rng(59);
  const Matrix x = oracle::random_matrix(50, 3, rng);
  std::vector<int> a(50);
  for (int i = 0; i < 50; ++i) a[static_cast<std::size_t>(i)] = i % 4;
  const auto exact = evaluate_loss(x, a, 4, 1.0, 1.0, false);
  ASSERT_FALSE(exact.sampled);
  double tig = 0.0, sep = 0.0;
  const int resamples = 10000;
  for (int s = 0; s < resamples; ++s) {
    LossOptions o;
    o.exact_max_nodes = 0;
    o.pair_budget = 50;
    o.seed = static_cast<std::uint64_t>(s);
    const auto v = evaluate_loss(x, a, 4, 1.0, 1.0, false, o);
    ASSERT_TRUE(v.sampled);
    tig += v.tightness;
    sep += v.separation;
  }
  EXPECT_NEAR(tig / resamples, exact.tightness, 0.01 * exact.tightness);
  EXPECT_NEAR(sep / resamples, exact.separation, 0.01 * exact.separation);
}

TEST(PairSampling, DeterministicUnderSeed) {
  std::mt19937_64 rng(61);
  const Matrix x = oracle::random_matrix(30, 2, rng);
  std::vector<int> a(30);
  for (int i = 0; i < 30; ++i) a[static_cast<std::size_t>(i)] = i % 3;
  LossOptions o;
  o.exact_max_nodes = 0;
  o.pair_budget = 100;
  o.seed = 9;
  const auto first = evaluate_loss(x, a, 3, 1.0, 1.0, true, o);
  const auto second = evaluate_loss(x, a, 3, 1.0, 1.0, true, o);
  EXPECT_EQ(first.total, second.total);
  EXPECT_EQ(first.gradient, second.gradient);
}

TEST(HandLayout, PropertyCheck) {
  const auto r = checks::hand_layout_losses();
  EXPECT_TRUE(r.pass) << r.detail;
}
