#pragma once

/**
 * @file lmi.hpp
 * @brief Small dense LMI feasibility engine plus the syntheses built on it:
 *        data-driven stabilizing gains, growth bounds for the detection
 *        phase, and the Lyapunov mismatch constant mu.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddswitch/data.hpp"
#include "ddswitch/linalg.hpp"

namespace ddswitch {

/// constant + sum_k z_k * coeffs[k]  >= 0  (all blocks symmetric, same size).
struct AffineLmi {
  Matrix constant;
  std::vector<Matrix> coeffs;

  Eigen::Index size() const { return constant.rows(); }

  Matrix evaluate(const Vector& z) const {
    Matrix out = constant;
    for (std::size_t k = 0; k < coeffs.size(); ++k) out += z(static_cast<Eigen::Index>(k)) * coeffs[k];
    return out;
  }

  void validate(std::size_t nvars) const {
    auto check = [&](const Matrix& m, const char* what) {
      if (m.rows() != constant.rows() || m.cols() != constant.rows()) {
        throw DimensionError(std::string("AffineLmi: ") + what + " block has wrong shape");
      }
      require_finite(m, "AffineLmi");
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument(std::string("AffineLmi: ") + what + " block is not symmetric");
      }
    };
    if (constant.rows() != constant.cols()) throw DimensionError("AffineLmi: constant not square");
    if (coeffs.size() != nvars) throw DimensionError("AffineLmi: inconsistent variable count");
    check(constant, "constant");
    for (const auto& c : coeffs) check(c, "coefficient");
  }
};

enum class FeasibilityStatus { Feasible, Infeasible, Unknown };

struct FeasibilityOptions {
  /// Variables are confined to |z_k| <= box; infeasibility is certified
  /// relative to this box.
  double box = 1e4;
  double gap_rel = 1e-8;
  int max_newton = 600;
};

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::Unknown;
  Vector z;
  /// min over constraints of (min eigenvalue - required level) at z.
  double slack = -std::numeric_limits<double>::infinity();
  /// Certified upper bound on the best achievable slack (dual objective).
  double dual_bound = std::numeric_limits<double>::infinity();
  int newton_steps = 0;
};

namespace detail {

struct BarrierBlock {
  const AffineLmi* lmi;
  double shift;
};

inline Matrix eval_block(const BarrierBlock& b, const Vector& z, double s) {
  Matrix g = b.lmi->evaluate(z);
  g.diagonal().array() -= b.shift + s;
  return 0.5 * (g + g.transpose());
}

}  // namespace detail

/**
 * Finds z with every LMI positive semidefinite, and the LMIs listed in
 * `strict` at least `margin` * I.
 *
 * Internally maximizes a common slack s (every block >= s * I on top of its
 * required level) with a log-barrier interior-point method inside a box. The
 * answer is Feasible only after an eigenvalue recheck of the returned point,
 * and Infeasible only when a dual certificate proves the best slack is
 * negative.
 */
inline FeasibilityResult solve_feasibility(const std::vector<AffineLmi>& lmis,
                                           const std::vector<std::size_t>& strict, double margin,
                                           const FeasibilityOptions& opt = {}) {
  if (!(margin > 0.0)) throw std::invalid_argument("solve_feasibility: margin must be > 0");
  const std::size_t nvars = lmis.empty() ? 0 : lmis.front().coeffs.size();
  for (const auto& l : lmis) l.validate(nvars);
  std::vector<detail::BarrierBlock> blocks;
  blocks.reserve(lmis.size());
  for (std::size_t j = 0; j < lmis.size(); ++j) {
    const bool is_strict = std::find(strict.begin(), strict.end(), j) != strict.end();
    blocks.push_back({&lmis[j], is_strict ? margin : 0.0});
  }
  for (std::size_t j : strict) {
    if (j >= lmis.size()) throw std::out_of_range("solve_feasibility: strict index out of range");
  }

  const auto N = static_cast<Eigen::Index>(nvars);
  const double R = opt.box;
  FeasibilityResult res;
  res.z = Vector::Zero(N);

  auto true_slack = [&](const Vector& z) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) worst = std::min(worst, min_eig(detail::eval_block(b, z, 0.0)));
    return worst;
  };
  if (blocks.empty()) {
    res.status = FeasibilityStatus::Feasible;
    res.slack = std::numeric_limits<double>::infinity();
    return res;
  }

  Vector z = Vector::Zero(N);
  double s = true_slack(z) - 1.0;
  double nu = 2.0 * static_cast<double>(N);
  for (const auto& b : blocks) nu += static_cast<double>(b.lmi->size());

  // Cholesky of every block; false when some block is not positive definite.
  std::vector<Eigen::LLT<Matrix>> chol(blocks.size());
  auto factor = [&](const Vector& zz, double ss) {
    for (Eigen::Index k = 0; k < N; ++k) {
      if (!(std::abs(zz(k)) < R)) return false;
    }
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      chol[j].compute(detail::eval_block(blocks[j], zz, ss));
      if (chol[j].info() != Eigen::Success) return false;
      if (!(chol[j].matrixLLT().diagonal().array() > 0.0).all()) return false;
    }
    return true;
  };
  auto barrier = [&](double t, const Vector& zz, double ss) {
    double v = -t * ss;
    for (const auto& c : chol) v -= 2.0 * c.matrixLLT().diagonal().array().log().sum();
    for (Eigen::Index k = 0; k < N; ++k) v -= std::log(R - zz(k)) + std::log(R + zz(k));
    return v;
  };

  if (!factor(z, s)) {
    res.status = FeasibilityStatus::Unknown;
    return res;
  }

  double t = 1.0;
  const double growth = 10.0;
  int steps = 0;
  std::vector<Matrix> ginv(blocks.size());
  std::vector<std::vector<Matrix>> w(blocks.size());
  while (steps < opt.max_newton) {
    // Centering.
    for (int inner = 0; inner < 80 && steps < opt.max_newton; ++inner, ++steps) {
      Vector grad = Vector::Zero(N + 1);
      Matrix hess = Matrix::Zero(N + 1, N + 1);
      for (std::size_t j = 0; j < blocks.size(); ++j) {
        const Eigen::Index b = blocks[j].lmi->size();
        ginv[j] = chol[j].solve(Matrix::Identity(b, b));
        w[j].resize(static_cast<std::size_t>(N));
        for (Eigen::Index k = 0; k < N; ++k) {
          w[j][static_cast<std::size_t>(k)] = ginv[j] * blocks[j].lmi->coeffs[static_cast<std::size_t>(k)];
        }
        for (Eigen::Index k = 0; k < N; ++k) {
          const Matrix& wk = w[j][static_cast<std::size_t>(k)];
          grad(k) -= wk.trace();
          for (Eigen::Index l = 0; l <= k; ++l) {
            const Matrix& wl = w[j][static_cast<std::size_t>(l)];
            hess(k, l) += wk.cwiseProduct(wl.transpose()).sum();
          }
          hess(N, k) -= wk.cwiseProduct(ginv[j].transpose()).sum();
        }
        grad(N) += ginv[j].trace();
        hess(N, N) += ginv[j].squaredNorm();
      }
      grad(N) -= t;
      for (Eigen::Index k = 0; k < N; ++k) {
        grad(k) += 1.0 / (R - z(k)) - 1.0 / (R + z(k));
        hess(k, k) += 1.0 / ((R - z(k)) * (R - z(k))) + 1.0 / ((R + z(k)) * (R + z(k)));
      }
      hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose().eval();
      hess.diagonal().array() += 1e-14 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Matrix> ldlt(hess);
      Vector dy = ldlt.solve(-grad);
      if (!dy.allFinite()) break;
      const double decrement = -grad.dot(dy);
      if (decrement < 1e-10) break;
      const double f0 = barrier(t, z, s);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Vector zn = z + alpha * dy.head(N);
        const double sn = s + alpha * dy(N);
        if (!factor(zn, sn)) continue;
        if (barrier(t, zn, sn) <= f0 - 0.25 * alpha * decrement) {
          z = zn;
          s = sn;
          moved = true;
          break;
        }
      }
      if (!moved) {
        factor(z, s);
        break;
      }
    }
    factor(z, s);

    // Dual certificate from the current barrier point: Z_j = G_j^{-1} / trace.
    double total_trace = 0.0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const Eigen::Index b = blocks[j].lmi->size();
      ginv[j] = chol[j].solve(Matrix::Identity(b, b));
      total_trace += ginv[j].trace();
    }
    double dual = 0.0;
    Vector gk = Vector::Zero(N);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const Matrix zj = 0.5 * (ginv[j] + ginv[j].transpose()) / total_trace;
      Matrix c = blocks[j].lmi->constant;
      c.diagonal().array() -= blocks[j].shift;
      dual += zj.cwiseProduct(c).sum();
      for (Eigen::Index k = 0; k < N; ++k) {
        gk(k) += zj.cwiseProduct(blocks[j].lmi->coeffs[static_cast<std::size_t>(k)]).sum();
      }
    }
    dual += R * gk.cwiseAbs().sum();
    res.dual_bound = std::min(res.dual_bound, dual);
    res.newton_steps = steps;

    const double slack = true_slack(z);
    if (res.dual_bound < 0.0) {
      res.status = FeasibilityStatus::Infeasible;
      res.z = z;
      res.slack = slack;
      return res;
    }
    if (nu / t <= opt.gap_rel * std::max(1.0, std::abs(s))) {
      res.z = z;
      res.slack = slack;
      res.status = slack >= 0.0 ? FeasibilityStatus::Feasible : FeasibilityStatus::Unknown;
      return res;
    }
    t *= growth;
  }
  res.z = z;
  res.slack = true_slack(z);
  res.status = res.slack >= 0.0 ? FeasibilityStatus::Feasible : FeasibilityStatus::Unknown;
  return res;
}

// ---------------------------------------------------------------------------
// Stabilizing gain synthesis from data

struct GainCertificate {
  Matrix K;  // m x n
  Matrix P;  // n x n, symmetric positive definite
  double lambda = 0.0;
};

enum class SynthStatus { Certified, NotInformative, Inconclusive };

inline const char* to_string(SynthStatus s) {
  switch (s) {
    case SynthStatus::Certified: return "certified";
    case SynthStatus::NotInformative: return "not_informative";
    case SynthStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct SynthResult {
  SynthStatus status = SynthStatus::Inconclusive;
  std::optional<GainCertificate> certificate;
  double slack = 0.0;
  std::string detail;
};

struct SynthOptions {
  Tolerance tol{};
  /// Required minimum eigenvalue in the trace-normalized problem.
  double margin = 1e-7;
  int verify_samples = 200;
  double verify_tol = 1e-6;
  std::uint64_t verify_seed = 0x5eedULL;
  FeasibilityOptions solver{};
};

/// Checks (A+BK)^T P (A+BK) <= lambda P + tol I on sampled members of the
/// consistent set (sample 0 is the least-squares nominal pair).
inline bool verify_uniform_decay(const DataMatrices& data, const GainCertificate& cert,
                                 int sample_count = 200, double tol = 1e-6,
                                 std::uint64_t seed = 0x5eedULL, double radius = 0.0,
                                 const Tolerance& rank_tol = {}) {
  const ConsistentSet cs = consistent_set(data, rank_tol);
  if (!(radius > 0.0)) radius = 10.0 * (1.0 + cs.nominal.norm());
  const auto samples = sample_consistent(cs, std::max(sample_count, 1), radius, seed);
  for (const auto& sys : samples) {
    const Matrix acl = sys.A + sys.B * cert.K;
    const Matrix gap = acl.transpose() * cert.P * acl - cert.lambda * cert.P;
    if (sym_eig_extremes(gap).second > tol) return false;
  }
  return true;
}

namespace detail {

/// Variable layout for (Q symmetric n x n, L m x n).
struct GainVars {
  Eigen::Index n, m;
  Eigen::Index nq() const { return n * (n + 1) / 2; }
  Eigen::Index count() const { return nq() + m * n; }
  Eigen::Index q_index(Eigen::Index i, Eigen::Index j) const {
    if (i > j) std::swap(i, j);
    // row-major upper triangle
    return i * n - i * (i - 1) / 2 + (j - i);
  }
  Eigen::Index l_index(Eigen::Index r, Eigen::Index c) const { return nq() + r * n + c; }

  Matrix q_of(const Vector& z) const {
    Matrix q(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) q(i, j) = z(q_index(i, j));
    return q;
  }
  Matrix l_of(const Vector& z) const {
    Matrix l(m, n);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c) l(r, c) = z(l_index(r, c));
    return l;
  }
  /// Unit matrices: Q with the (i,j) pair set to 1, or L with entry (r,c) 1.
  Matrix q_unit(Eigen::Index k) const {
    Vector z = Vector::Zero(count());
    z(k) = 1.0;
    return q_of(z);
  }
  Matrix l_unit(Eigen::Index k) const {
    Vector z = Vector::Zero(count());
    z(k) = 1.0;
    return l_of(z);
  }
};

/// Homogeneous part of the data-driven stabilization LMI for given (Q, L).
inline Matrix gain_lmi_linear(const Matrix& q, const Matrix& l, double lambda) {
  const Eigen::Index n = q.rows();
  const Eigen::Index m = l.rows();
  const Eigen::Index S = 3 * n + m;
  Matrix h = Matrix::Zero(S, S);
  h.block(0, 0, n, n) = lambda * q;
  h.block(n, 2 * n + m, n, n) = q;
  h.block(2 * n + m, n, n, n) = q;
  h.block(2 * n, 2 * n + m, m, n) = l;
  h.block(2 * n + m, 2 * n, n, m) = l.transpose();
  h.block(2 * n + m, 2 * n + m, n, n) = q;
  return h;
}

inline Matrix gain_lmi_data_term(const DataMatrices& d) {
  const Eigen::Index n = d.n();
  const Eigen::Index m = d.m();
  Matrix v = Matrix::Zero(3 * n + m, d.T());
  v.topRows(n) = d.X_plus();
  v.middleRows(n, n) = -d.X_minus();
  v.middleRows(2 * n, m) = -d.U_minus();
  return v * v.transpose();
}

}  // namespace detail

/// Full LMI matrix of the data-driven stabilization condition at (Q, L).
inline Matrix gain_lmi_matrix(const DataMatrices& d, const Matrix& q, const Matrix& l,
                              double lambda) {
  return detail::gain_lmi_linear(q, l, lambda) + detail::gain_lmi_data_term(d);
}

/**
 * Searches Q > 0, L with the stabilization LMI feasible, and returns
 * K = L Q^{-1} and P = Q^{-1}.
 *
 * Vectors (0, a, b, 0) with [a; b] orthogonal to the regressor columns give a
 * zero quadratic form, so every feasible point satisfies Q a + L^T b = 0;
 * these equalities are eliminated and those directions projected out. The
 * data term is positive semidefinite and scaling (Q, L) down preserves the
 * LMI, so strict feasibility is equivalent to the homogeneous problem
 * "linear part > 0 on the kernel of the data term, Q > 0", solved under
 * trace(Q) = 1. The returned P is the inverse of that normalized Q; the full
 * LMI is rechecked at a scaled-down copy of the solution.
 */
inline SynthResult synth_gain(const DataMatrices& data, double lambda, const SynthOptions& opt = {}) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("synth_gain: lambda must be in (0,1)");
  if (data.T() < 1) throw std::invalid_argument("synth_gain: at least one transition required");
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const detail::GainVars vars{n, m};
  const Eigen::Index nv = vars.count();
  SynthResult out;

  // Equalities Q a + L^T b = 0 for [a; b] in ker [X-; U-]^T.
  const Matrix null_dirs = kernel_basis(normalize_columns(data.regressor()).transpose(), opt.tol);
  const Eigen::Index d = null_dirs.cols();
  Matrix eq = Matrix::Zero(n * d, nv);
  for (Eigen::Index c = 0; c < d; ++c) {
    const Vector a = null_dirs.col(c).head(n);
    const Vector b = null_dirs.col(c).tail(m);
    for (Eigen::Index k = 0; k < nv; ++k) {
      const Matrix qk = k < vars.nq() ? vars.q_unit(k) : Matrix::Zero(n, n);
      const Matrix lk = k < vars.nq() ? Matrix::Zero(m, n) : vars.l_unit(k);
      eq.block(c * n, k, n, 1) = qk * a + lk.transpose() * b;
    }
  }
  const Matrix basis = d == 0 ? Matrix(Matrix::Identity(nv, nv)) : kernel_basis(eq, opt.tol);
  const Eigen::Index nr = basis.cols();

  // trace(Q) = 1 on the equality-reduced variables: y = y0 + free * w.
  Vector trace_row = Vector::Zero(nr);
  for (Eigen::Index i = 0; i < nr; ++i) trace_row(i) = vars.q_of(basis.col(i)).trace();
  if (nr == 0 || trace_row.norm() <= opt.tol.rank_rel) {
    out.status = SynthStatus::NotInformative;
    out.detail = "equality constraints force Q = 0";
    return out;
  }
  const Vector y0 = trace_row / trace_row.squaredNorm();
  const Matrix free = kernel_basis(Matrix(trace_row.transpose()), opt.tol);

  // Projection onto the complement of the zero directions, then onto the
  // kernel of the data term inside it.
  const Eigen::Index S = 3 * n + m;
  Matrix zero_dirs = Matrix::Zero(S, d);
  zero_dirs.middleRows(n, n + m) = null_dirs;
  const Matrix keep = d == 0 ? Matrix(Matrix::Identity(S, S)) : kernel_basis(zero_dirs.transpose(), opt.tol);
  Matrix v = Matrix::Zero(S, data.T());
  v.topRows(n) = data.X_plus();
  v.middleRows(n, n) = -data.X_minus();
  v.middleRows(2 * n, m) = -data.U_minus();
  const Matrix kv = keep.transpose() * v;
  const Matrix ker = keep * kernel_basis(normalize_columns(kv).transpose(), opt.tol);

  auto reduced_pair = [&](const Vector& y) {
    const Vector z = basis * y;
    return std::pair<Matrix, Matrix>{vars.q_of(z), vars.l_of(z)};
  };
  auto sym = [](const Matrix& a) { return Matrix(0.5 * (a + a.transpose())); };
  AffineLmi lin_lmi{Matrix(ker.cols(), ker.cols()), {}};
  AffineLmi q_lmi{Matrix(n, n), {}};
  {
    auto [q0, l0] = reduced_pair(y0);
    lin_lmi.constant = sym(ker.transpose() * detail::gain_lmi_linear(q0, l0, lambda) * ker);
    q_lmi.constant = sym(q0);
  }
  for (Eigen::Index k = 0; k < free.cols(); ++k) {
    auto [qk, lk] = reduced_pair(free.col(k));
    lin_lmi.coeffs.push_back(sym(ker.transpose() * detail::gain_lmi_linear(qk, lk, lambda) * ker));
    q_lmi.coeffs.push_back(sym(qk));
  }
  std::vector<AffineLmi> lmis{q_lmi};
  std::vector<std::size_t> strict{0};
  if (ker.cols() > 0) {
    lmis.push_back(lin_lmi);
    strict.push_back(1);
  }

  const auto fr = solve_feasibility(lmis, strict, opt.margin, opt.solver);
  out.slack = fr.slack;
  if (fr.status == FeasibilityStatus::Infeasible) {
    out.status = SynthStatus::NotInformative;
    out.detail = "dual certificate bound " + std::to_string(fr.dual_bound);
    return out;
  }
  if (fr.status != FeasibilityStatus::Feasible) {
    out.status = SynthStatus::Inconclusive;
    out.detail = "solver did not certify either way (slack " + std::to_string(fr.slack) + ")";
    return out;
  }

  const auto [q, l] = reduced_pair(y0 + free * fr.z);
  GainCertificate cert;
  cert.P = sym(q.ldlt().solve(Matrix::Identity(n, n)));
  cert.K = l * cert.P;
  cert.lambda = lambda;

  // Largest power-of-two scale at which the full LMI holds strictly on the
  // kept directions.
  const Matrix d_keep = sym(kv * kv.transpose());
  const Matrix h_keep = sym(keep.transpose() * detail::gain_lmi_linear(q, l, lambda) * keep);
  double eps = 1.0;
  const double ref = d_keep.norm() + h_keep.norm();
  int halvings = 0;
  while (min_eig(d_keep + eps * h_keep) <= 1e-13 * ref * (1.0 + eps)) {
    if (++halvings > 200) break;
    eps *= 0.5;
  }
  eps *= 0.5;
  const Matrix full = gain_lmi_matrix(data, eps * q, eps * l, lambda);
  const double full_min = min_eig(full);
  if (halvings > 200 || full_min < -1e-9 * (1.0 + full.norm()) || min_eig(cert.P) <= 0.0) {
    out.status = SynthStatus::Inconclusive;
    out.detail = "recheck of the full LMI failed (min eig " + std::to_string(full_min) + ")";
    return out;
  }
  if (!verify_uniform_decay(data, cert, opt.verify_samples, opt.verify_tol, opt.verify_seed, 0.0,
                            opt.tol)) {
    out.status = SynthStatus::Inconclusive;
    out.detail = "sampled decay verification failed";
    return out;
  }
  out.status = SynthStatus::Certified;
  out.certificate = std::move(cert);
  return out;
}

// ---------------------------------------------------------------------------
// Growth bound during detection and the mismatch constant

struct GrowthParams {
  double lambda_u = 1.0;
  double k = 0.0;
};

struct GrowthOptions {
  /// Lower clamp on lambda_u; the stability analysis needs lambda_u >= 1.
  double lambda_u_floor = 1.0;
  double resolution = 1e-3;
  double k_floor = 1e-12;
};

/// Block matrix [P^{-1} A B; A^T lu*P 0; B^T 0 k*I] of the growth condition.
inline Matrix growth_lmi_matrix(const Matrix& a, const Matrix& b, const Matrix& p, double lambda_u,
                                double k) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Matrix g = Matrix::Zero(2 * n + m, 2 * n + m);
  g.block(0, 0, n, n) = p.ldlt().solve(Matrix::Identity(n, n));
  g.block(0, n, n, n) = a;
  g.block(0, 2 * n, n, m) = b;
  g.block(n, 0, n, n) = a.transpose();
  g.block(2 * n, 0, m, n) = b.transpose();
  g.block(n, n, n, n) = lambda_u * p;
  g.block(2 * n, 2 * n, m, m) = k * Matrix::Identity(m, m);
  return 0.5 * (g + g.transpose());
}

namespace detail {

inline void require_spd(const Matrix& p, const char* where) {
  require_finite(p, where);
  if (p.rows() != p.cols() || p.rows() == 0) throw DimensionError(std::string(where) + ": P not square");
  if (min_eig(p) <= 0.0) throw std::invalid_argument(std::string(where) + ": P is not positive definite");
}

/// lambda_u * P - A^T P A > 0 (relative slack).
inline bool growth_state_block_ok(const Matrix& a, const Matrix& p, double lambda_u) {
  const Matrix s = lambda_u * p - a.transpose() * p * a;
  return min_eig(s) > 1e-10 * (1.0 + p.norm() * (1.0 + a.norm() * a.norm()));
}

/// Smallest k with the growth condition for one mode at a feasible lambda_u.
inline double min_growth_k(const Matrix& a, const Matrix& b, const Matrix& p, double lambda_u) {
  const Matrix s = lambda_u * p - a.transpose() * p * a;
  const Matrix c = a.transpose() * p * b;
  const Matrix bpb = b.transpose() * p * b;
  const Matrix schur = bpb + c.transpose() * s.ldlt().solve(c);
  return b.cols() == 0 ? 0.0 : sym_eig_extremes(schur).second;
}

}  // namespace detail

/**
 * Smallest lambda_u (bisection, given resolution) for which some k makes the
 * growth condition hold in every mode, and then the smallest common k there.
 */
inline GrowthParams growth_params(const std::vector<SystemPair>& modes, const std::vector<Matrix>& ps,
                                  const GrowthOptions& opt = {}) {
  if (modes.size() != ps.size() || modes.empty()) {
    throw std::invalid_argument("growth_params: need one P per mode");
  }
  for (const auto& p : ps) detail::require_spd(p, "growth_params");
  auto feasible = [&](double lu) {
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (!detail::growth_state_block_ok(modes[i].A, ps[i], lu)) return false;
    }
    return true;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (!feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw std::runtime_error("growth_params: no finite lambda_u found");
  }
  while (hi - lo > opt.resolution) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  GrowthParams gp;
  gp.lambda_u = std::max(hi, opt.lambda_u_floor);
  double k = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    k = std::max(k, detail::min_growth_k(modes[i].A, modes[i].B, ps[i], gp.lambda_u));
  }
  gp.k = std::max(k * (1.0 + 1e-8), opt.k_floor);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const Matrix g = growth_lmi_matrix(modes[i].A, modes[i].B, ps[i], gp.lambda_u, gp.k);
    if (min_eig(g) < -1e-9 * (1.0 + g.norm())) {
      throw std::runtime_error("growth_params: recheck failed for mode " + std::to_string(i + 1));
    }
  }
  return gp;
}

/// max over ordered pairs (i, j) of ||P_i P_j^{-1}||.
inline double compute_mu(const std::vector<Matrix>& ps) {
  double mu = 0.0;
  for (const auto& pj : ps) {
    Eigen::LDLT<Matrix> f(pj);
    if (f.info() != Eigen::Success || !(f.vectorD().array() > 0.0).all()) {
      throw std::invalid_argument("compute_mu: singular or indefinite P");
    }
    const Matrix pj_inv = f.solve(Matrix::Identity(pj.rows(), pj.cols()));
    for (const auto& pi : ps) mu = std::max(mu, spectral_norm(pi * pj_inv));
  }
  return mu;
}

}  // namespace ddswitch
