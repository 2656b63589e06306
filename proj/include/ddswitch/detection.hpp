#pragma once

/**
 * @file detection.hpp
 * @brief Per-step mode detection: excitation input selection, online data
 *        accumulation, and pruning of incompatible library modes.
 */

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddswitch/data.hpp"
#include "ddswitch/linalg.hpp"

namespace ddswitch {

/// No null direction of the online regressor touches the input rows.
class NoExcitationDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every library mode has been ruled out by the online data.
class EmptyMatchSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DetectionOptions {
  /// Relative residual below which a state counts as lying in the span of the
  /// earlier online states.
  double span_tol = 1e-9;
  /// Rank cutoff for kernel and compatibility decisions.
  Tolerance rank_tol = kCompatTolerance;
};

/// A null vector (xi, nu) of the transposed online regressor, split by rows.
struct ExcitationDirection {
  Vector xi;
  Vector nu;
};

struct DetectionState {
  DataMatrices online;
  MatchSet matches;
  double u_max = 1.0;

  /// Fresh phase: the current state is the only online sample and every mode is a candidate.
  static DetectionState start(const Vector& x, Eigen::Index m, std::size_t p, double u_max) {
    if (!(u_max > 0.0)) throw std::invalid_argument("DetectionState: u_max must be > 0");
    return {DataMatrices::initial(x, m), MatchSet::all(p), u_max};
  }
};

/// x lies in im(states), decided by least squares on normalized columns.
inline bool in_span(const Matrix& states, const Vector& x, double tol = 1e-9) {
  if (states.rows() != x.size()) throw DimensionError("in_span: dimension mismatch");
  const Matrix basis = normalize_columns(states);
  if (basis.cols() == 0) return x.norm() <= tol;
  const Vector c = least_squares(basis, x, Tolerance{1e-12, 1e-9});
  return (x - basis * c).norm() <= tol * (1.0 + x.norm());
}

/**
 * Null vector of the transposed online regressor with the largest input part.
 * Among unit combinations of the kernel basis, the one maximizing ||nu|| is
 * the top right singular vector of the basis' input block.
 */
inline ExcitationDirection excitation_direction(const DataMatrices& online,
                                                const Tolerance& tol = kCompatTolerance) {
  const Eigen::Index n = online.n();
  const Eigen::Index m = online.m();
  const Matrix kern = kernel_basis(normalize_columns(online.regressor()).transpose(), tol);
  if (kern.cols() == 0 || m == 0) throw NoExcitationDirection("excitation_direction: regressor kernel is empty");
  const Matrix nu_block = kern.bottomRows(m);
  Eigen::JacobiSVD<Matrix> svd(nu_block, Eigen::ComputeThinV);
  if (svd.singularValues()(0) <= tol.rank_rel) {
    throw NoExcitationDirection("excitation_direction: every null direction has nu = 0");
  }
  const Vector c = svd.matrixV().col(0);
  const Vector v = kern * c;
  return {v.head(n), v.tail(m)};
}

/// Detection input for the current state x (the newest online sample).
inline Vector detect_input(const DetectionState& st, const Vector& x, const DetectionOptions& opt = {}) {
  const Eigen::Index m = st.online.m();
  require_finite(x, "detect_input");
  if (x.size() != st.online.n()) throw DimensionError("detect_input: state dimension mismatch");
  if (st.matches.empty()) throw EmptyMatchSet("detect_input: no candidate modes left");
  Vector u = Vector::Zero(m);
  if (st.online.T() == 0) return u;
  if (!in_span(st.online.X_minus(), x, opt.span_tol)) return u;

  const ExcitationDirection dir = excitation_direction(st.online, opt.rank_tol);
  const double xi_x = dir.xi.dot(x);
  const double sign = xi_x < 0.0 ? -1.0 : 1.0;
  u = sign * st.u_max * dir.nu / dir.nu.norm();
  const double pairing = xi_x + dir.nu.dot(u);
  if (!(std::abs(pairing) >= opt.span_tol * (1.0 + x.norm()))) {
    throw NoExcitationDirection("detect_input: excitation pairing vanishes");
  }
  return u;
}

/// Appends (u_t, x_next) to the online data and prunes incompatible modes.
inline DetectionState detect_update(const DetectionState& st, const Vector& u, const Vector& x_next,
                                    const std::vector<DataMatrices>& init, const DetectionOptions& opt = {}) {
  DetectionState next = st;
  next.online = st.online.appended(u, x_next);
  next.matches = prune_matches(st.matches, init, next.online, opt.rank_tol);
  return next;
}

/// The unique remaining mode, or nothing while two or more remain.
inline std::optional<std::size_t> is_resolved(const DetectionState& st) {
  if (st.matches.empty()) throw EmptyMatchSet("is_resolved: every mode was ruled out");
  if (st.matches.size() == 1) return st.matches.remaining().front();
  return std::nullopt;
}

}  // namespace ddswitch
