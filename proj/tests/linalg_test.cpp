#include <random>

#include <gtest/gtest.h>

#include "ddswitch/linalg.hpp"

using namespace ddswitch;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(NumericRank, Identity) { EXPECT_EQ(numeric_rank(Matrix::Identity(2, 2)), 2); }

TEST(NumericRank, AllOnes) { EXPECT_EQ(numeric_rank(Matrix::Ones(2, 2)), 1); }

TEST(NumericRank, RankThreeProduct) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    EXPECT_EQ(numeric_rank(randn(5, 3, rng) * randn(3, 8, rng)), 3);
  }
}

TEST(NumericRank, RejectsNonFinite) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(numeric_rank(m), NonFiniteError);
}

TEST(KernelBasis, AxisAligned) {
  Matrix m(1, 2);
  m << 1, 0;
  const Matrix k = kernel_basis(m);
  ASSERT_EQ(k.cols(), 1);
  EXPECT_NEAR(std::abs(k(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(k(0, 0), 0.0, 1e-14);
}

TEST(KernelBasis, FullColumnRankHasEmptyKernel) {
  std::mt19937_64 rng(3);
  EXPECT_EQ(kernel_basis(randn(6, 3, rng)).cols(), 0);
}

TEST(KernelBasis, RandomWideMatrix) {
  std::mt19937_64 rng(11);
  const Matrix m = randn(2, 4, rng);
  const Matrix k = kernel_basis(m);
  ASSERT_EQ(k.cols(), 2);
  EXPECT_LT((m * k).norm(), 1e-10);
  EXPECT_LT((k.transpose() * k - Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(KernelIncluded, EqualKernels) {
  EXPECT_TRUE(kernel_included(Matrix::Identity(3, 3), Matrix::Identity(3, 3)));
}

TEST(KernelIncluded, TransverseKernels) {
  Matrix a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  EXPECT_FALSE(kernel_included(a, b));
}

TEST(KernelIncluded, RowMultiple) {
  Matrix a(1, 2), b(1, 2);
  a << 1, 1;
  b << 2, 2;
  EXPECT_TRUE(kernel_included(a, b));
}

TEST(KernelIncluded, ColumnMismatchThrows) {
  EXPECT_THROW(kernel_included(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(SpectralNorm, Identity) { EXPECT_NEAR(spectral_norm(Matrix::Identity(4, 4)), 1.0, 1e-15); }

TEST(SymEigExtremes, Diagonal) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 5;
  const auto [lo, hi] = sym_eig_extremes(d);
  EXPECT_NEAR(lo, 2.0, 1e-14);
  EXPECT_NEAR(hi, 5.0, 1e-14);
}

TEST(LeastSquares, ConsistentSquareSystem) {
  std::mt19937_64 rng(5);
  const Matrix a = randn(4, 4, rng) + 4.0 * Matrix::Identity(4, 4);
  const Matrix x = randn(4, 2, rng);
  const Matrix b = a * x;
  const Matrix sol = least_squares(a, b);
  EXPECT_LT((a * sol - b).norm(), 1e-12);
  EXPECT_LT((sol - x).norm(), 1e-10);
}

TEST(LeastSquares, MinimumNormOnUnderdetermined) {
  Matrix a(1, 2);
  a << 1, 1;
  const Matrix sol = least_squares(a, Matrix::Constant(1, 1, 2.0));
  EXPECT_NEAR(sol(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(sol(1, 0), 1.0, 1e-12);
}

TEST(Controllability, DoubleIntegrator) {
  Matrix a(2, 2), b(2, 1);
  a << 1, 1, 0, 1;
  b << 0, 1;
  EXPECT_TRUE(is_controllable(a, b));
  b << 1, 0;
  EXPECT_FALSE(is_controllable(a, b));
}
