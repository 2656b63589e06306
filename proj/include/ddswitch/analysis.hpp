#pragma once

/**
 * @file analysis.hpp
 * @brief Post-run stability analysis: detection-phase counters, average
 *        dwell / activation time fits, discrete timers, the stability
 *        condition, the explicit state bound, and a per-step replay of the
 *        Lyapunov-like certificate W = U * V.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ddswitch/controller.hpp"
#include "ddswitch/lmi.hpp"
#include "ddswitch/simulate.hpp"

namespace ddswitch {

class RecurrenceViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConditionUnsatisfied : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CertificateViolated : public std::runtime_error {
 public:
  CertificateViolated(long t, int proof_case)
      : std::runtime_error("certificate violated at t = " + std::to_string(t) + " (case " +
                           std::to_string(proof_case) + ")"),
        t_(t),
        case_(proof_case) {}
  long step() const { return t_; }
  int proof_case() const { return case_; }

 private:
  long t_;
  int case_;
};

// ---------------------------------------------------------------------------
// Counters

namespace detail {

inline void check_interval(const RunLog& log, long ta, long tb) {
  if (ta < 0 || tb <= ta || tb > log.horizon()) {
    throw std::out_of_range("interval [" + std::to_string(ta) + ", " + std::to_string(tb) +
                            ") outside log of length " + std::to_string(log.horizon()));
  }
}

/// c[t] = number of detection-phase starts in [0, t), t = 0..H.
inline std::vector<long> start_prefix(const RunLog& log) {
  std::vector<long> c(static_cast<std::size_t>(log.horizon()) + 1, 0);
  std::size_t k = 0;
  for (long t = 0; t < log.horizon(); ++t) {
    long add = 0;
    while (k < log.detect_starts.size() && log.detect_starts[k] == t) {
      ++add;
      ++k;
    }
    c[static_cast<std::size_t>(t) + 1] = c[static_cast<std::size_t>(t)] + add;
  }
  return c;
}

/// d[t] = number of detection steps in [0, t), t = 0..H.
inline std::vector<long> detect_prefix(const RunLog& log) {
  std::vector<long> d(static_cast<std::size_t>(log.horizon()) + 1, 0);
  for (long t = 0; t < log.horizon(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    d[i + 1] = d[i] + (log.steps[i].phase == Phase::Detect ? 1 : 0);
  }
  return d;
}

/**
 * h[t] = min over s <= t of (c[s] - rate s) minus (c[t] - rate t), a value in
 * (-inf, 0]. Evaluated from the last instant the minimum was attained, so
 * rounding does not accumulate along the log.
 */
inline std::vector<double> deficit(const std::vector<long>& c, double rate) {
  std::vector<double> h(c.size(), 0.0);
  std::size_t r = 0;
  for (std::size_t t = 1; t < c.size(); ++t) {
    const double v = rate * static_cast<double>(t - r) - static_cast<double>(c[t] - c[r]);
    if (v >= 0.0) {
      r = t;
    } else {
      h[t] = v;
    }
  }
  return h;
}

/// max over 0 <= ta < tb <= H of (c[tb] - c[ta]) - rate * (tb - ta).
inline double max_excess(const std::vector<long>& c, double rate) {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t r = 0;
  for (std::size_t t = 1; t < c.size(); ++t) {
    const double v = rate * static_cast<double>(t - r) - static_cast<double>(c[t] - c[r]);
    best = std::max(best, -v);
    if (v >= 0.0) r = t;
  }
  return best;
}

}  // namespace detail

/// Number of detection-phase starts in [ta, tb).
inline long count_N(const RunLog& log, long ta, long tb) {
  detail::check_interval(log, ta, tb);
  return static_cast<long>(std::count_if(log.detect_starts.begin(), log.detect_starts.end(),
                                         [&](long s) { return s >= ta && s < tb; }));
}

/// Number of detection steps in [ta, tb).
inline long count_M(const RunLog& log, long ta, long tb) {
  detail::check_interval(log, ta, tb);
  long m = 0;
  for (long t = ta; t < tb; ++t) m += log.steps[static_cast<std::size_t>(t)].phase == Phase::Detect ? 1 : 0;
  return m;
}

struct AdtFit {
  double tau = 1.0;
  double N0 = 1.0;
};

struct AatFit {
  double eta = 0.0;
  double T0 = 0.0;
};

/// Smallest N0 >= 1 with N(ta, tb) <= N0 + (tb - ta) / tau on every interval, per grid value.
inline std::vector<AdtFit> fit_adt(const RunLog& log, const std::vector<double>& tau_grid) {
  if (log.horizon() < 1) throw std::invalid_argument("fit_adt: empty log");
  const auto c = detail::start_prefix(log);
  std::vector<AdtFit> out;
  for (double tau : tau_grid) {
    if (!(tau >= 1.0)) throw std::invalid_argument("fit_adt: tau must be >= 1");
    out.push_back({tau, std::max(1.0, detail::max_excess(c, 1.0 / tau))});
  }
  return out;
}

/// Smallest T0 >= 0 with M(ta, tb) <= T0 + eta (tb - ta) on every interval, per grid value.
inline std::vector<AatFit> fit_aat(const RunLog& log, const std::vector<double>& eta_grid) {
  if (log.horizon() < 1) throw std::invalid_argument("fit_aat: empty log");
  const auto d = detail::detect_prefix(log);
  std::vector<AatFit> out;
  for (double eta : eta_grid) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("fit_aat: eta must be in [0,1]");
    out.push_back({eta, std::max(0.0, detail::max_excess(d, eta))});
  }
  return out;
}

/// Exhaustive recheck of both counting conditions; returns the number of violating intervals.
inline long audit_counting(const RunLog& log, const AdtFit& adt, const AatFit& aat, double tol = 1e-9) {
  const auto c = detail::start_prefix(log);
  const auto d = detail::detect_prefix(log);
  long bad = 0;
  const auto H = static_cast<std::size_t>(log.horizon());
  for (std::size_t ta = 0; ta < H; ++ta) {
    for (std::size_t tb = ta + 1; tb <= H; ++tb) {
      const double len = static_cast<double>(tb - ta);
      if (static_cast<double>(c[tb] - c[ta]) > adt.N0 + len / adt.tau + tol) ++bad;
      if (static_cast<double>(d[tb] - d[ta]) > aat.T0 + aat.eta * len + tol) ++bad;
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Timers

struct TimerPair {
  std::vector<double> tau_d;  // t = 0..H
  std::vector<double> tau_a;
};

/**
 * tau_d(t) = N0 + n_d(t) - (N(0,t) - t/tau) with n_d the running minimum of
 * N(0,s) - s/tau, and the analogous tau_a. Recurrences and ranges are checked
 * and a RecurrenceViolated is thrown on any failure.
 */
inline TimerPair build_timers(const RunLog& log, const AdtFit& adt, const AatFit& aat, double tol = 1e-12) {
  const auto c = detail::start_prefix(log);
  const auto d = detail::detect_prefix(log);
  const std::size_t len = c.size();
  TimerPair tp;
  tp.tau_d.resize(len);
  tp.tau_a.resize(len);
  const std::vector<double> hd = detail::deficit(c, 1.0 / adt.tau);
  const std::vector<double> ha = detail::deficit(d, aat.eta);
  for (std::size_t t = 0; t < len; ++t) {
    tp.tau_d[t] = adt.N0 + hd[t];
    tp.tau_a[t] = aat.T0 + ha[t];
  }

  auto fail = [](const std::string& what, std::size_t t) {
    throw RecurrenceViolated(what + " at t = " + std::to_string(t));
  };
  for (std::size_t t = 0; t < len; ++t) {
    if (tp.tau_d[t] < -tol || tp.tau_d[t] > adt.N0 + tol) fail("tau_d out of range", t);
    if (tp.tau_a[t] < -tol || tp.tau_a[t] > aat.T0 + tol) fail("tau_a out of range", t);
    if (t + 1 == len) break;
    const bool start = c[t + 1] > c[t];
    const bool detecting = d[t + 1] > d[t];
    const double dd = tp.tau_d[t + 1] - tp.tau_d[t];
    const double da = tp.tau_a[t + 1] - tp.tau_a[t];
    if (start) {
      if (std::abs(dd - (1.0 / adt.tau - 1.0)) > tol) fail("tau_d jump", t);
    } else if (dd < -tol || dd > 1.0 / adt.tau + tol) {
      fail("tau_d flow", t);
    }
    if (detecting) {
      if (std::abs(da - (aat.eta - 1.0)) > tol) fail("tau_a jump", t);
    } else if (da < -tol || da > aat.eta + tol) {
      fail("tau_a flow", t);
    }
  }
  return tp;
}

// ---------------------------------------------------------------------------
// Constants, condition and bound

struct StabilityParams {
  double lambda = 0.8;
  double lambda_u = 1.0;
  double k = 0.0;
  double mu = 1.0;
  double tau = 1.0;
  double N0 = 1.0;
  double eta = 0.0;
  double T0 = 0.0;
  double u_max = 1.0;
  double lambda_bar = 1.0;
  double lambda_under = 1.0;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("StabilityParams: ") + what);
    };
    need(lambda > 0.0 && lambda < 1.0, "lambda must be in (0,1)");
    need(lambda_u >= 1.0, "lambda_u must be >= 1");
    need(mu >= 1.0 - 1e-12, "mu must be >= 1");
    need(tau >= 1.0, "tau must be >= 1");
    need(eta >= 0.0 && eta <= 1.0, "eta must be in [0,1]");
    need(N0 >= 1.0, "N0 must be >= 1");
    need(T0 >= 0.0, "T0 must be >= 0");
    need(k >= 0.0 && u_max >= 0.0, "k and u_max must be >= 0");
    need(lambda_under > 0.0 && lambda_bar >= lambda_under, "bad eigenvalue extremes");
  }

  double log_mu_ratio() const { return std::log(mu / lambda); }
  double log_lu_ratio() const { return std::log(lambda_u / lambda); }
  double log_a() const { return std::log(lambda) + log_mu_ratio() / tau + log_lu_ratio() * eta; }
  double log_b() const { return log_mu_ratio() * (1.0 / tau + N0) + log_lu_ratio() * (eta + T0); }
  double a() const { return std::exp(log_a()); }
  double b() const { return std::exp(log_b()); }
  double r() const { return k * u_max * u_max; }
  double c() const { return std::sqrt(lambda_bar * lambda * b() / (lambda_under * a())); }
  double zeta() const { return std::sqrt(a()); }
  double r_const() const { return u_max * std::sqrt(b() * k / (lambda_under * (1.0 - a()))); }
  /// log U(tau_d, tau_a).
  double log_U(double tau_d, double tau_a) const { return tau_d * log_mu_ratio() + tau_a * log_lu_ratio(); }
};

struct ConditionReport {
  double lhs = 0.0;
  bool holds = false;
  double a = 0.0;
  bool a_below_one = false;
  double margin() const { return 1.0 - lhs; }
};

inline ConditionReport check_condition(const StabilityParams& p) {
  p.validate();
  const double ll = std::log(p.lambda);
  ConditionReport rep;
  rep.lhs = (1.0 - std::log(p.lambda_u) / ll) * p.eta + (1.0 - std::log(p.mu) / ll) / p.tau;
  rep.holds = rep.lhs < 1.0;
  rep.a = p.a();
  rep.a_below_one = rep.a < 1.0;
  return rep;
}

/// t -> c a^{t/2} |x0| + r_const.
class IssBound {
 public:
  IssBound(const StabilityParams& p, double x0_norm)
      : c_(p.c()), half_log_a_(0.5 * p.log_a()), x0_(x0_norm), r_(p.r_const()) {}
  double operator()(long t) const {
    return c_ * std::exp(half_log_a_ * static_cast<double>(t)) * x0_ + r_;
  }
  double offset() const { return r_; }

 private:
  double c_;
  double half_log_a_;
  double x0_;
  double r_;
};

inline IssBound iss_bound(const StabilityParams& p, double x0_norm) {
  p.validate();
  if (!(p.a() < 1.0)) throw ConditionUnsatisfied("iss_bound: a = " + std::to_string(p.a()) + " >= 1");
  if (!(x0_norm >= 0.0)) throw std::invalid_argument("iss_bound: |x0| must be >= 0");
  return IssBound(p, x0_norm);
}

/// Largest and smallest eigenvalue over a family of symmetric matrices.
inline std::pair<double, double> eigen_extremes(const std::vector<Matrix>& ps) {
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& p : ps) {
    auto [mn, mx] = sym_eig_extremes(p);
    lo = std::min(lo, mn);
    hi = std::max(hi, mx);
  }
  return {hi, lo};
}

/// Library and plant constants with the counting parameters left at their defaults.
inline StabilityParams base_params(const ModeLibrary& lib, const std::vector<SystemPair>& true_modes, double u_max,
                                   const GrowthOptions& gopt = {}) {
  const auto ps = lib.certificates();
  const GrowthParams gp = growth_params(true_modes, ps, gopt);
  StabilityParams p;
  p.lambda = lib.lambda;
  p.lambda_u = gp.lambda_u;
  p.k = gp.k;
  p.mu = compute_mu(ps);
  p.u_max = u_max;
  std::tie(p.lambda_bar, p.lambda_under) = eigen_extremes(ps);
  return p;
}

inline StabilityParams with_fit(StabilityParams p, const AdtFit& adt, const AatFit& aat) {
  p.tau = adt.tau;
  p.N0 = adt.N0;
  p.eta = aat.eta;
  p.T0 = aat.T0;
  return p;
}

struct FitSelection {
  AdtFit adt;
  AatFit aat;
  ConditionReport condition;
};

/// Pair from the two fitted curves with the smallest condition left-hand side.
inline FitSelection select_fit(const StabilityParams& base, const std::vector<AdtFit>& adts,
                               const std::vector<AatFit>& aats) {
  if (adts.empty() || aats.empty()) throw std::invalid_argument("select_fit: empty grid");
  std::optional<FitSelection> best;
  for (const auto& d : adts) {
    for (const auto& a : aats) {
      const ConditionReport rep = check_condition(with_fit(base, d, a));
      if (!best || rep.lhs < best->condition.lhs) best = FitSelection{d, a, rep};
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Certificate replay

struct CertificateStep {
  long t = 0;
  int proof_case = 3;
  std::size_t mode = 0;
  double log_U = 0.0;
  double log_W = 0.0;
  double log_W_next = 0.0;
  double log_rhs = 0.0;
  bool ok = true;
};

struct CertificateReport {
  std::vector<CertificateStep> steps;
  /// log W(t) for t = 0..H.
  std::vector<double> log_W;
  std::array<long, 3> case_counts{0, 0, 0};
  std::array<long, 3> case_violations{0, 0, 0};
  std::vector<long> violations;
  long U_range_violations = 0;
  long chain_violations = 0;
  long lower_bound_violations = 0;

  bool holds() const { return violations.empty(); }
  bool all_cases_exercised() const { return case_counts[0] > 0 && case_counts[1] > 0 && case_counts[2] > 0; }
  void require() const {
    if (!violations.empty()) {
      const auto& s = steps[static_cast<std::size_t>(violations.front())];
      throw CertificateViolated(s.t, s.proof_case);
    }
  }
};

namespace detail {

/// log(exp(x) + exp(y)) with -inf handled.
inline double log_add(double x, double y) {
  if (x == -std::numeric_limits<double>::infinity()) return y;
  if (y == -std::numeric_limits<double>::infinity()) return x;
  const double hi = std::max(x, y);
  return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

inline double safe_log(double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); }

}  // namespace detail

/**
 * Mode whose P defines V at each time t = 0..H.
 *
 * Inside a detection phase the mode is the one that phase resolves to (the
 * plant's active mode when the log ends first); at the first instant of a
 * later phase it is still the previously selected mode; elsewhere it is the
 * controller's selection.
 */
inline std::vector<std::size_t> certificate_modes(const RunLog& log) {
  const long H = log.horizon();
  std::vector<std::size_t> out(static_cast<std::size_t>(H) + 1, 0);
  auto sd_at = [&](long t) {
    return t < H ? log.steps[static_cast<std::size_t>(t)].sigma_d : log.final_sigma_d;
  };
  auto truth_at = [&](long t) { return log.steps[static_cast<std::size_t>(std::min(t, H - 1))].sigma_true; };
  std::size_t i = 0;
  for (long t = 0; t <= H; ++t) {
    while (i + 1 < log.detect_starts.size() && log.detect_starts[i + 1] <= t) ++i;
    std::optional<std::size_t> mode = sd_at(t);
    if (!log.detect_starts.empty() && log.detect_starts[i] <= t) {
      const long start = log.detect_starts[i];
      const long end = i < log.stabilize_starts.size() ? log.stabilize_starts[i] : H + 1;
      const bool window = t <= end && (t > start || t == 0 || !mode);
      if (window) mode = i < log.resolved_modes.size() ? log.resolved_modes[i] : truth_at(t);
    }
    out[static_cast<std::size_t>(t)] = mode ? *mode : truth_at(t);
  }
  return out;
}

/**
 * Replays W(t) = U(tau_d, tau_a) * x^T P x along the log and checks
 * W(t+1) <= a W(t) + b r at every step (relative tolerance rel_tol), plus the
 * range of U, the comparison chain, and the lower bound on W.
 */
inline CertificateReport w_certificate(const RunLog& log, const StabilityParams& p, const std::vector<Matrix>& ps,
                                       const TimerPair& timers, double rel_tol = 1e-8) {
  p.validate();
  const long H = log.horizon();
  if (timers.tau_d.size() != static_cast<std::size_t>(H) + 1) {
    throw std::invalid_argument("w_certificate: timers do not match the log");
  }
  const auto modes = certificate_modes(log);
  CertificateReport rep;
  rep.log_W.resize(static_cast<std::size_t>(H) + 1);
  std::vector<double> log_U(rep.log_W.size());
  for (long t = 0; t <= H; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Vector& x = log.state(t);
    const Matrix& P = ps.at(modes[i]);
    log_U[i] = p.log_U(timers.tau_d[i], timers.tau_a[i]);
    rep.log_W[i] = log_U[i] + detail::safe_log(x.dot(P * x));
  }

  const double log_a = p.log_a();
  const double log_br = p.log_b() + detail::safe_log(p.r());
  const double log_tol = std::log1p(rel_tol);
  std::size_t start_idx = 0;
  for (long t = 0; t < H; ++t) {
    const auto i = static_cast<std::size_t>(t);
    while (start_idx < log.detect_starts.size() && log.detect_starts[start_idx] < t) ++start_idx;
    CertificateStep s;
    s.t = t;
    const bool is_start = start_idx < log.detect_starts.size() && log.detect_starts[start_idx] == t;
    s.proof_case = is_start ? 1 : (log.steps[i].phase == Phase::Detect ? 2 : 3);
    s.mode = modes[i];
    s.log_U = log_U[i];
    s.log_W = rep.log_W[i];
    s.log_W_next = rep.log_W[i + 1];
    s.log_rhs = detail::log_add(log_a + s.log_W, log_br);
    s.ok = s.log_W_next <= s.log_rhs + log_tol;
    rep.case_counts[static_cast<std::size_t>(s.proof_case - 1)]++;
    if (!s.ok) {
      rep.violations.push_back(t);
      rep.case_violations[static_cast<std::size_t>(s.proof_case - 1)]++;
    }
    rep.steps.push_back(s);
  }

  // Invariants implied by the one-step inequality.
  const double log_U_max = std::log(p.lambda) + p.log_b() - log_a;
  const double log_under = std::log(p.lambda_under);
  for (long t = 0; t <= H; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (log_U[i] < -1e-12 || log_U[i] > log_U_max + 1e-9) ++rep.U_range_violations;
    const double xn2 = log.state(t).squaredNorm();
    if (xn2 > 0.0 && log_under + std::log(xn2) > rep.log_W[i] + log_tol) ++rep.lower_bound_violations;
    // W(t) <= a^t W(0) + b r (1 - a^t) / (1 - a)
    const double td = static_cast<double>(t);
    double log_geo;
    if (std::abs(log_a) < 1e-15) {
      log_geo = detail::safe_log(td);
    } else {
      const double num = -std::expm1(td * log_a);
      const double den = -std::expm1(log_a);
      log_geo = detail::safe_log(num / den);
    }
    const double bound = detail::log_add(td * log_a + rep.log_W[0], log_br + log_geo);
    if (rep.log_W[i] > bound + std::log1p(rel_tol * (1.0 + td))) ++rep.chain_violations;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Full report

struct AnalysisOptions {
  std::vector<double> tau_grid{1.5, 2, 3, 5, 8, 10, 20, 50, 100};
  std::vector<double> eta_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.375, 0.5, 0.75, 1.0};
  GrowthOptions growth{};
  double cert_rel_tol = 1e-8;
};

struct AnalysisReport {
  std::vector<AdtFit> adt_curve;
  std::vector<AatFit> aat_curve;
  FitSelection selection;
  StabilityParams params;
  long counting_violations = 0;
  TimerPair timers;
  CertificateReport certificate;
  /// Per-step |x(t)| and bound(t); the bound is present only when a < 1.
  std::vector<double> x_norm;
  std::vector<double> bound;
  long bound_violations = 0;
};

inline AnalysisReport analyze_run(const RunLog& log, const ModeLibrary& lib, const std::vector<SystemPair>& true_modes,
                                  double u_max, const AnalysisOptions& opt = {}) {
  if (log.horizon() < 1) throw std::invalid_argument("analyze_run: empty log");
  AnalysisReport rep;
  const StabilityParams base = base_params(lib, true_modes, u_max, opt.growth);
  rep.adt_curve = fit_adt(log, opt.tau_grid);
  rep.aat_curve = fit_aat(log, opt.eta_grid);
  rep.selection = select_fit(base, rep.adt_curve, rep.aat_curve);
  rep.params = with_fit(base, rep.selection.adt, rep.selection.aat);
  rep.counting_violations = audit_counting(log, rep.selection.adt, rep.selection.aat);
  rep.timers = build_timers(log, rep.selection.adt, rep.selection.aat);
  rep.certificate = w_certificate(log, rep.params, lib.certificates(), rep.timers, opt.cert_rel_tol);
  const long H = log.horizon();
  for (long t = 0; t <= H; ++t) rep.x_norm.push_back(log.state(t).norm());
  if (rep.params.a() < 1.0) {
    const IssBound f = iss_bound(rep.params, rep.x_norm.front());
    for (long t = 0; t <= H; ++t) {
      rep.bound.push_back(f(t));
      if (rep.x_norm[static_cast<std::size_t>(t)] > rep.bound.back() * (1.0 + 1e-9)) ++rep.bound_violations;
    }
  }
  return rep;
}

}  // namespace ddswitch
