#pragma once

/**
 * @file linalg.hpp
 * @brief Tolerance-aware dense kernels shared by every other module.
 *
 * All rank decisions in the library go through numeric_rank(), which uses a
 * single relative singular-value cutoff. Empty matrices (zero rows or zero
 * columns) are valid inputs: they have rank 0 and a full-space kernel.
 */

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace ddswitch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when an input matrix carries NaN or infinite entries.
class NonFiniteError : public std::invalid_argument {
 public:
  explicit NonFiniteError(const std::string& where)
      : std::invalid_argument(where + ": non-finite matrix entry") {}
};

/// Thrown when two operands have incompatible shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Tolerance {
  /// Singular values at or below rank_rel * sigma_max count as zero.
  double rank_rel = 1e-9;
  /// Slack used by positive-semidefiniteness checks.
  double psd_margin = 1e-9;

  void validate() const {
    if (!(rank_rel > 0.0) || !(psd_margin > 0.0)) {
      throw std::invalid_argument("Tolerance: rank_rel and psd_margin must be > 0");
    }
  }
};

inline void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw NonFiniteError(where);
}

namespace detail {

inline Eigen::JacobiSVD<Matrix> svd(const Matrix& m, int options) {
  return Eigen::JacobiSVD<Matrix>(m, options);
}

inline int rank_from_singular_values(const Vector& sv, double rel) {
  if (sv.size() == 0) return 0;
  const double smax = sv.maxCoeff();
  if (smax <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel * smax) ++r;
  }
  return r;
}

}  // namespace detail

inline int numeric_rank(const Matrix& m, const Tolerance& tol = {}) {
  require_finite(m, "numeric_rank");
  if (m.rows() == 0 || m.cols() == 0) return 0;
  auto s = detail::svd(m, 0);
  return detail::rank_from_singular_values(s.singularValues(), tol.rank_rel);
}

/// Orthonormal basis of ker M, one column per null direction.
inline Matrix kernel_basis(const Matrix& m, const Tolerance& tol = {}) {
  require_finite(m, "kernel_basis");
  const Eigen::Index cols = m.cols();
  if (cols == 0) return Matrix(0, 0);
  if (m.rows() == 0) return Matrix::Identity(cols, cols);
  auto s = detail::svd(m, Eigen::ComputeFullV);
  const int r = detail::rank_from_singular_values(s.singularValues(), tol.rank_rel);
  return s.matrixV().rightCols(cols - r);
}

/// ker A is contained in ker B, decided as rank([A; B]) == rank(A).
inline bool kernel_included(const Matrix& a, const Matrix& b, const Tolerance& tol = {}) {
  if (a.cols() != b.cols()) {
    throw DimensionError("kernel_included: column counts differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
  }
  require_finite(a, "kernel_included");
  require_finite(b, "kernel_included");
  if (a.cols() == 0) return true;
  Matrix stacked(a.rows() + b.rows(), a.cols());
  stacked << a, b;
  // rank([A; B]) >= rank(A) in exact arithmetic; a smaller numeric value only
  // means the stacked cutoff is coarser, not that B adds directions.
  return numeric_rank(stacked, tol) <= numeric_rank(a, tol);
}

inline double spectral_norm(const Matrix& m) {
  require_finite(m, "spectral_norm");
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  auto s = detail::svd(m, 0);
  return s.singularValues()(0);
}

/// (min eigenvalue, max eigenvalue) of the symmetric part (M + M^T) / 2.
inline std::pair<double, double> sym_eig_extremes(const Matrix& m) {
  require_finite(m, "sym_eig_extremes");
  if (m.rows() != m.cols()) throw DimensionError("sym_eig_extremes: matrix is not square");
  if (m.rows() == 0) return {0.0, 0.0};
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1)};
}

inline double min_eig(const Matrix& m) { return sym_eig_extremes(m).first; }

/// Minimum-norm least-squares solution of A X = B (B may have several columns).
inline Matrix least_squares(const Matrix& a, const Matrix& b, const Tolerance& tol = {}) {
  require_finite(a, "least_squares");
  require_finite(b, "least_squares");
  if (a.rows() != b.rows()) throw DimensionError("least_squares: row counts differ");
  if (a.cols() == 0) return Matrix(0, b.cols());
  if (a.rows() == 0) return Matrix::Zero(a.cols(), b.cols());
  Eigen::JacobiSVD<Matrix> s(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  s.setThreshold(tol.rank_rel);
  return s.solve(b);
}

/// Copy of M with each nonzero column scaled to unit Euclidean norm and zero
/// columns removed. Column space (and so ker M^T) is unchanged.
inline Matrix normalize_columns(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm > 0.0) out.col(k++) = m.col(j) / nrm;
  }
  return out.leftCols(k);
}

/// Controllability matrix [B, AB, ..., A^{n-1}B].
inline Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  Matrix c(n, n * b.cols());
  if (n == 0) return c;
  c.leftCols(b.cols()) = b;
  for (Eigen::Index i = 1; i < n; ++i) {
    c.middleCols(i * b.cols(), b.cols()) = a * c.middleCols((i - 1) * b.cols(), b.cols());
  }
  return c;
}

inline bool is_controllable(const Matrix& a, const Matrix& b, const Tolerance& tol = {}) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw DimensionError("is_controllable: shape mismatch");
  }
  return numeric_rank(controllability_matrix(a, b), tol) == a.rows();
}

inline double spectral_radius(const Matrix& a) {
  require_finite(a, "spectral_radius");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ddswitch
