#pragma once

/**
 * @file data.hpp
 * @brief Recorded trajectories, the set of systems consistent with them, and
 *        the compatibility test used to match online data to library modes.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddswitch/linalg.hpp"

namespace ddswitch {

/// Default relative cutoff for compatibility decisions.
inline constexpr Tolerance kCompatTolerance{1e-8, 1e-9};

class NoExactFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * A state/input record x(0..T), u(0..T-1) from a single linear mode.
 *
 * The derived blocks X+, X-, U- and the stacked regressor [X-; U-] are
 * computed on demand from the two stored matrices.
 */
class DataMatrices {
 public:
  DataMatrices() = default;

  DataMatrices(Matrix states, Matrix inputs) : x_(std::move(states)), u_(std::move(inputs)) {
    if (x_.cols() < 1) throw DimensionError("DataMatrices: at least one state sample required");
    if (x_.cols() != u_.cols() + 1) {
      throw DimensionError("DataMatrices: expected " + std::to_string(x_.cols() - 1) +
                           " input samples, got " + std::to_string(u_.cols()));
    }
    require_finite(x_, "DataMatrices");
    require_finite(u_, "DataMatrices");
  }

  /// Single initial state, no transitions yet.
  static DataMatrices initial(const Vector& x0, Eigen::Index m) {
    return DataMatrices(Matrix(x0), Matrix(m, 0));
  }

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index m() const { return u_.rows(); }
  /// Number of recorded transitions.
  Eigen::Index T() const { return u_.cols(); }

  const Matrix& X() const { return x_; }
  const Matrix& U_minus() const { return u_; }
  Matrix X_plus() const { return x_.rightCols(T()); }
  Matrix X_minus() const { return x_.leftCols(T()); }

  Matrix regressor() const {
    Matrix r(n() + m(), T());
    r << X_minus(), u_;
    return r;
  }

  Vector last_state() const { return x_.col(x_.cols() - 1); }

  /// Returns a copy extended by one transition (u, x_next).
  DataMatrices appended(const Vector& u, const Vector& x_next) const {
    if (u.size() != m() || x_next.size() != n()) {
      throw DimensionError("DataMatrices::appended: sample dimension mismatch");
    }
    Matrix x(n(), x_.cols() + 1);
    x << x_, x_next;
    Matrix uu(m(), u_.cols() + 1);
    uu << u_, u;
    return DataMatrices(std::move(x), std::move(uu));
  }

 private:
  Matrix x_{0, 1};
  Matrix u_{0, 0};
};

/**
 * Affine parameterization of every (A, B) with X+ = A X- + B U-:
 * [A B] = nominal + Theta * kernel_dirs^T for arbitrary Theta (n x d).
 */
struct ConsistentSet {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Matrix nominal;      // n x (n+m), minimum-norm solution
  Matrix kernel_dirs;  // (n+m) x d, orthonormal, spans ker [X-; U-]^T

  Eigen::Index free_directions() const { return kernel_dirs.cols(); }
  Eigen::Index dimension() const { return n * kernel_dirs.cols(); }
  bool singleton() const { return kernel_dirs.cols() == 0; }

  Matrix member(const Matrix& theta) const { return nominal + theta * kernel_dirs.transpose(); }
  Matrix A(const Matrix& ab) const { return ab.leftCols(n); }
  Matrix B(const Matrix& ab) const { return ab.rightCols(m); }
};

struct SystemPair {
  Matrix A;
  Matrix B;
};

/// Residual X+ - A X- - B U- of a candidate pair against data.
inline Matrix data_residual(const DataMatrices& d, const Matrix& a, const Matrix& b) {
  return d.X_plus() - a * d.X_minus() - b * d.U_minus();
}

inline ConsistentSet consistent_set(const DataMatrices& d, const Tolerance& tol = {}) {
  ConsistentSet cs;
  cs.n = d.n();
  cs.m = d.m();
  const Matrix r = d.regressor();
  const Matrix xp = d.X_plus();
  if (d.T() == 0) {
    cs.nominal = Matrix::Zero(d.n(), d.n() + d.m());
    cs.kernel_dirs = Matrix::Identity(d.n() + d.m(), d.n() + d.m());
    return cs;
  }
  // [A B] r = X+  <=>  r^T [A B]^T = X+^T
  cs.nominal = least_squares(r.transpose(), xp.transpose(), tol).transpose();
  cs.kernel_dirs = kernel_basis(r.transpose(), tol);
  const double resid = (xp - cs.nominal * r).norm();
  const double scale = xp.norm() + cs.nominal.norm() * r.norm();
  if (resid > 1e-8 * std::max(scale, 1e-300)) {
    throw NoExactFit("consistent_set: data admit no exact linear fit (residual " +
                     std::to_string(resid) + ")");
  }
  return cs;
}

/**
 * Deterministic draws from the consistent set. Sample 0 is the nominal pair;
 * the others perturb it by Theta with Frobenius norm uniform in the ball of
 * the given radius.
 */
inline std::vector<SystemPair> sample_consistent(const ConsistentSet& cs, int count, double radius,
                                                 std::uint64_t seed) {
  if (!(radius > 0.0)) throw std::invalid_argument("sample_consistent: radius must be > 0");
  std::vector<SystemPair> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  out.push_back({cs.A(cs.nominal), cs.B(cs.nominal)});
  const Eigen::Index d = cs.free_directions();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double dim = static_cast<double>(cs.n * d);
  for (int s = 1; s < count; ++s) {
    if (d == 0) {
      out.push_back(out.front());
      continue;
    }
    Matrix theta(cs.n, d);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = gauss(rng);
    const double nrm = theta.norm();
    if (nrm > 0.0) theta *= radius * std::pow(unif(rng), 1.0 / dim) / nrm;
    const Matrix ab = cs.member(theta);
    out.push_back({cs.A(ab), cs.B(ab)});
  }
  return out;
}

namespace detail {

inline void require_same_dims(const DataMatrices& a, const DataMatrices& b, const char* where) {
  if (a.n() != b.n() || a.m() != b.m()) {
    throw DimensionError(std::string(where) + ": datasets have different (n, m)");
  }
}

/// Concatenated regressor and successor blocks with every column pair scaled
/// by the same positive factor. Kernel inclusion is invariant under this.
inline std::pair<Matrix, Matrix> equilibrated_joint(const DataMatrices& a, const DataMatrices& b) {
  const Eigen::Index T = a.T() + b.T();
  Matrix r(a.n() + a.m(), T);
  r << a.regressor(), b.regressor();
  Matrix y(a.n(), T);
  y << a.X_plus(), b.X_plus();
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < T; ++j) {
    double s = r.col(j).norm();
    if (s == 0.0) s = y.col(j).norm();
    if (s == 0.0) continue;
    r.col(k) = r.col(j) / s;
    y.col(k) = y.col(j) / s;
    ++k;
  }
  return {r.leftCols(k), y.leftCols(k)};
}

}  // namespace detail

/// Whether some single (A, B) explains both datasets exactly.
inline bool compatible(const DataMatrices& d1, const DataMatrices& d2,
                       const Tolerance& tol = kCompatTolerance) {
  detail::require_same_dims(d1, d2, "compatible");
  if (d1.T() + d2.T() == 0) return true;
  auto [r, y] = detail::equilibrated_joint(d1, d2);
  return kernel_included(r, y, tol);
}

/// Mode indices (0-based) still compatible with the online data.
class MatchSet {
 public:
  MatchSet() = default;
  explicit MatchSet(std::vector<std::size_t> modes) : remaining_(std::move(modes)) {
    std::sort(remaining_.begin(), remaining_.end());
    remaining_.erase(std::unique(remaining_.begin(), remaining_.end()), remaining_.end());
  }
  static MatchSet all(std::size_t p) {
    std::vector<std::size_t> v(p);
    for (std::size_t i = 0; i < p; ++i) v[i] = i;
    return MatchSet(std::move(v));
  }

  const std::vector<std::size_t>& remaining() const { return remaining_; }
  std::size_t size() const { return remaining_.size(); }
  bool empty() const { return remaining_.empty(); }
  bool contains(std::size_t i) const {
    return std::binary_search(remaining_.begin(), remaining_.end(), i);
  }
  bool operator==(const MatchSet&) const = default;

 private:
  std::vector<std::size_t> remaining_;
};

inline MatchSet prune_matches(const MatchSet& ms, const std::vector<DataMatrices>& init,
                              const DataMatrices& online, const Tolerance& tol = kCompatTolerance) {
  if (online.T() == 0) return ms;
  std::vector<std::size_t> keep;
  keep.reserve(ms.size());
  for (std::size_t i : ms.remaining()) {
    if (i >= init.size()) throw std::out_of_range("prune_matches: mode index out of range");
    if (compatible(init[i], online, tol)) keep.push_back(i);
  }
  return MatchSet(std::move(keep));
}

inline bool pairwise_incompatible(const std::vector<DataMatrices>& init,
                                  const Tolerance& tol = kCompatTolerance) {
  for (std::size_t i = 0; i < init.size(); ++i) {
    for (std::size_t j = i + 1; j < init.size(); ++j) {
      if (compatible(init[i], init[j], tol)) return false;
    }
  }
  return true;
}

}  // namespace ddswitch
