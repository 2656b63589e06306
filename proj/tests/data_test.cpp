#include <random>

#include <gtest/gtest.h>

#include "ddswitch/data.hpp"
#include "ddswitch/plant.hpp"

using namespace ddswitch;

namespace {

DataMatrices scalar_data(std::initializer_list<double> xs, std::initializer_list<double> us) {
  Matrix x(1, static_cast<Eigen::Index>(xs.size()));
  Matrix u(1, static_cast<Eigen::Index>(us.size()));
  Eigen::Index i = 0;
  for (double v : xs) x(0, i++) = v;
  i = 0;
  for (double v : us) u(0, i++) = v;
  return DataMatrices(x, u);
}

}  // namespace

TEST(DataMatrices, Views) {
  const DataMatrices d = scalar_data({1, 2, 3}, {4, 5});
  EXPECT_EQ(d.T(), 2);
  EXPECT_EQ(d.X_minus()(0, 1), 2);
  EXPECT_EQ(d.X_plus()(0, 0), 2);
  EXPECT_EQ(d.regressor().rows(), 2);
  EXPECT_EQ(d.regressor()(1, 1), 5);
}

TEST(DataMatrices, ColumnCountMismatchThrows) {
  EXPECT_THROW(DataMatrices(Matrix::Zero(2, 3), Matrix::Zero(1, 3)), DimensionError);
}

TEST(DataMatrices, AppendedGrowsByOne) {
  const DataMatrices d = DataMatrices::initial(Vector::Ones(2), 1).appended(Vector::Zero(1), Vector::Zero(2));
  EXPECT_EQ(d.T(), 1);
  EXPECT_EQ(d.last_state(), Vector::Zero(2));
}

TEST(ConsistentSet, NoTransitionsIsWholeSpace) {
  const ConsistentSet cs = consistent_set(DataMatrices::initial(Vector::Ones(3), 2));
  EXPECT_EQ(cs.free_directions(), 5);
  EXPECT_EQ(cs.nominal.norm(), 0.0);
}

TEST(ConsistentSet, FullRankIsGeneratingPair) {
  const auto modes = gen_modes(4, 3, 2, 1);
  const DataMatrices d = gen_init_data(modes[0], 5, 9);
  const ConsistentSet cs = consistent_set(d);
  ASSERT_TRUE(cs.singleton());
  EXPECT_LT((cs.A(cs.nominal) - modes[0].A).norm(), 1e-8);
  EXPECT_LT((cs.B(cs.nominal) - modes[0].B).norm(), 1e-8);
}

TEST(ConsistentSet, ScalarHandExample) {
  const ConsistentSet cs = consistent_set(scalar_data({1, 0.5}, {0}));
  EXPECT_NEAR(cs.nominal(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(cs.nominal(0, 1), 0.0, 1e-14);
  ASSERT_EQ(cs.free_directions(), 1);
  EXPECT_NEAR(cs.kernel_dirs(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(cs.kernel_dirs(1, 0)), 1.0, 1e-14);
}

TEST(ConsistentSet, InconsistentDataThrows) {
  // x: 1 -> 1 and 1 -> 2 under the same input.
  EXPECT_THROW(consistent_set(scalar_data({1, 1, 1, 2}, {0, 5, 0})), NoExactFit);
}

TEST(SampleConsistent, SingletonRepeatsNominal) {
  const auto modes = gen_modes(8, 2, 1, 1);
  const ConsistentSet cs = consistent_set(gen_init_data(modes[0], 3, 1));
  for (const auto& s : sample_consistent(cs, 10, 1.0, 3)) EXPECT_EQ(s.A, cs.A(cs.nominal));
}

TEST(SampleConsistent, UnconstrainedFillsBall) {
  const ConsistentSet cs = consistent_set(DataMatrices::initial(Vector::Ones(2), 1));
  const auto samples = sample_consistent(cs, 200, 1.0, 5);
  double largest = 0.0;
  for (const auto& s : samples) {
    Matrix ab(2, 3);
    ab << s.A, s.B;
    EXPECT_LE(ab.norm(), 1.0 + 1e-12);
    largest = std::max(largest, ab.norm());
  }
  EXPECT_GT(largest, 0.8);
}

TEST(SampleConsistent, SamplesExplainTheData) {
  const auto modes = gen_modes(12, 4, 2, 1);
  const DataMatrices d = gen_init_data(modes[0], 4, 2);
  const ConsistentSet cs = consistent_set(d);
  EXPECT_GT(cs.free_directions(), 0);
  for (const auto& s : sample_consistent(cs, 50, 10.0, 1)) {
    EXPECT_LT(data_residual(d, s.A, s.B).norm(), 1e-8 * (1.0 + s.A.norm() + s.B.norm()));
  }
}

TEST(Compatible, SelfCompatible) {
  const auto modes = gen_modes(1, 3, 2, 1);
  const DataMatrices d = gen_init_data(modes[0], 4, 3);
  EXPECT_TRUE(compatible(d, d));
}

TEST(Compatible, EmptyOnlineAlwaysCompatible) {
  const auto modes = gen_modes(1, 3, 2, 1);
  EXPECT_TRUE(compatible(gen_init_data(modes[0], 5, 3), DataMatrices::initial(Vector::Ones(3), 2)));
}

TEST(Compatible, ScalarModesWithOppositePoles) {
  // Mode 1: a = 1, mode 2: a = -1; the input column is never excited.
  const DataMatrices m1 = scalar_data({2, 2}, {0});
  const DataMatrices m2 = scalar_data({2, -2}, {0});
  const DataMatrices online = scalar_data({1, 1}, {0});
  EXPECT_TRUE(compatible(m1, online));
  EXPECT_FALSE(compatible(m2, online));
}

TEST(PruneMatches, EmptyOnlineKeepsSet) {
  const auto modes = gen_modes(2, 2, 1, 3);
  std::vector<DataMatrices> init;
  for (std::size_t i = 0; i < 3; ++i) init.push_back(gen_init_data(modes[i], 3, i));
  const MatchSet ms({0, 2});
  EXPECT_EQ(prune_matches(ms, init, DataMatrices::initial(Vector::Ones(2), 1)), ms);
}

TEST(PruneMatches, OwnDataSelectsOwnMode) {
  const auto modes = gen_modes(2, 3, 2, 4);
  std::vector<DataMatrices> init;
  for (std::size_t i = 0; i < 4; ++i) init.push_back(gen_init_data(modes[i], 5, 10 + i));
  ASSERT_TRUE(pairwise_incompatible(init));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(prune_matches(MatchSet::all(4), init, init[i]), MatchSet({i}));
  }
}

TEST(PruneMatches, FullRankOnlineLeavesOneMode) {
  const auto modes = gen_modes(6, 3, 1, 3);
  std::vector<DataMatrices> init;
  for (std::size_t i = 0; i < 3; ++i) init.push_back(gen_init_data(modes[i], 3, 20 + i));
  const DataMatrices online = gen_init_data(modes[1], 4, 99);
  EXPECT_EQ(prune_matches(MatchSet::all(3), init, online), MatchSet({1}));
}

TEST(PairwiseIncompatible, IdenticalData) {
  const auto modes = gen_modes(1, 2, 1, 1);
  const DataMatrices d = gen_init_data(modes[0], 3, 3);
  EXPECT_FALSE(pairwise_incompatible({d, d}));
}

TEST(PairwiseIncompatible, DistinctFullRankModes) {
  const auto modes = gen_modes(3, 2, 1, 2);
  EXPECT_TRUE(pairwise_incompatible({gen_init_data(modes[0], 3, 1), gen_init_data(modes[1], 3, 2)}));
}

TEST(PairwiseIncompatible, SingleModeVacuous) {
  const auto modes = gen_modes(1, 2, 1, 1);
  EXPECT_TRUE(pairwise_incompatible({gen_init_data(modes[0], 2, 3)}));
}

TEST(MatchSet, SortsAndDeduplicates) {
  const MatchSet ms({3, 1, 3});
  EXPECT_EQ(ms.remaining(), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(ms.contains(3));
  EXPECT_FALSE(ms.contains(2));
}
