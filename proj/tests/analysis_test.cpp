#include <gtest/gtest.h>

#include "ddswitch/analysis.hpp"
#include "ddswitch/scenario.hpp"

using namespace ddswitch;

namespace {

/// Log with the given phase pattern ('D' detect, 'S' stabilize) and zero states.
RunLog pattern_log(const std::string& phases) {
  RunLog log;
  log.n = 1;
  log.m = 1;
  for (std::size_t t = 0; t < phases.size(); ++t) {
    StepRecord r;
    r.t = static_cast<long>(t);
    r.x = Vector::Zero(1);
    r.u = Vector::Zero(1);
    r.phase = phases[t] == 'D' ? Phase::Detect : Phase::Stabilize;
    const bool edge = t == 0 || phases[t] != phases[t - 1];
    if (edge) (r.phase == Phase::Detect ? log.detect_starts : log.stabilize_starts).push_back(r.t);
    log.steps.push_back(r);
  }
  log.x_final = Vector::Zero(1);
  return log;
}

std::string periodic(int period, int detect, int cycles) {
  std::string s;
  for (int c = 0; c < cycles; ++c) s += std::string(detect, 'D') + std::string(period - detect, 'S');
  return s;
}

StabilityParams plain_params() {
  StabilityParams p;
  p.lambda = 0.5;
  p.lambda_u = 2.0;
  p.k = 3.0;
  p.mu = 4.0;
  p.tau = 20;
  p.N0 = 1.0;
  p.eta = 0.05;
  p.T0 = 2.0;
  p.u_max = 1.0;
  p.lambda_bar = 5.0;
  p.lambda_under = 0.5;
  return p;
}

}  // namespace

TEST(Counting, WindowWithoutDetection) {
  const RunLog log = pattern_log("DDSSSSSSSS");
  EXPECT_EQ(count_N(log, 3, 10), 0);
  EXPECT_EQ(count_M(log, 3, 10), 0);
}

TEST(Counting, WindowCoveringOnePhase) {
  const RunLog log = pattern_log("SSSDDDSSSS");
  EXPECT_EQ(count_N(log, 2, 7), 1);
  EXPECT_EQ(count_M(log, 2, 7), 3);
  EXPECT_THROW(count_N(log, 4, 4), std::out_of_range);
  EXPECT_THROW(count_M(log, 0, 11), std::out_of_range);
}

TEST(Fit, NoDetectionClampsN0) {
  const RunLog log = pattern_log("SSSSSSSSSS");
  for (const auto& f : fit_adt(log, {1.5, 8, 100})) EXPECT_EQ(f.N0, 1.0);
  for (const auto& f : fit_aat(log, {0.0, 0.5})) EXPECT_EQ(f.T0, 0.0);
}

TEST(Fit, PeriodicPhasesGiveEtaThreeEighths) {
  const RunLog log = pattern_log(periodic(8, 3, 40));
  const AatFit f = fit_aat(log, {3.0 / 8.0}).front();
  EXPECT_LE(f.T0, 3.0);
  const AdtFit g = fit_adt(log, {8.0}).front();
  EXPECT_LE(g.N0, 1.0 + 1e-12);
  EXPECT_EQ(audit_counting(log, g, f), 0);
}

TEST(Fit, MatchesExhaustiveSearch) {
  const RunLog log = pattern_log("DDSSSDSSSSSSDDDSSDSSSSSSSSSDDSS");
  const auto c = detail::start_prefix(log);
  const auto d = detail::detect_prefix(log);
  for (double tau : {1.5, 3.0, 7.0}) {
    double brute = 1.0;
    for (long a = 0; a < log.horizon(); ++a) {
      for (long b = a + 1; b <= log.horizon(); ++b) {
        brute = std::max(brute, static_cast<double>(count_N(log, a, b)) - static_cast<double>(b - a) / tau);
        EXPECT_EQ(count_N(log, a, b), c[static_cast<std::size_t>(b)] - c[static_cast<std::size_t>(a)]);
        EXPECT_EQ(count_M(log, a, b), d[static_cast<std::size_t>(b)] - d[static_cast<std::size_t>(a)]);
      }
    }
    EXPECT_NEAR(fit_adt(log, {tau}).front().N0, brute, 1e-12);
  }
}

TEST(Timers, NoEventsKeepsTauDAtN0) {
  const RunLog log = pattern_log(std::string(30, 'S'));
  const TimerPair tp = build_timers(log, {5.0, 2.0}, {0.1, 1.5});
  for (double v : tp.tau_d) EXPECT_EQ(v, 2.0);
  for (double v : tp.tau_a) EXPECT_EQ(v, 1.5);
}

TEST(Timers, SingleEventDropsThenClimbs) {
  const std::string ph = "SSSSSDSSSSSSSSSSSSSS";
  const RunLog log = pattern_log(ph);
  const double tau = 4.0;
  const AdtFit adt = fit_adt(log, {tau}).front();
  const TimerPair tp = build_timers(log, adt, fit_aat(log, {0.25}).front());
  EXPECT_NEAR(tp.tau_d[6] - tp.tau_d[5], 1.0 / tau - 1.0, 1e-12);
  for (std::size_t t = 6; t + 1 < tp.tau_d.size(); ++t) {
    EXPECT_GE(tp.tau_d[t + 1] - tp.tau_d[t], -1e-12);
    EXPECT_LE(tp.tau_d[t + 1] - tp.tau_d[t], 1.0 / tau + 1e-12);
  }
}

TEST(Timers, RangesOnPeriodicLog) {
  const RunLog log = pattern_log(periodic(7, 2, 30));
  const AdtFit adt = fit_adt(log, {3.0}).front();
  const AatFit aat = fit_aat(log, {0.2}).front();
  const TimerPair tp = build_timers(log, adt, aat);
  for (std::size_t t = 0; t < tp.tau_d.size(); ++t) {
    EXPECT_GE(tp.tau_d[t], 0.0);
    EXPECT_LE(tp.tau_d[t], adt.N0);
    EXPECT_GE(tp.tau_a[t], 0.0);
    EXPECT_LE(tp.tau_a[t], aat.T0);
  }
}

TEST(Timers, UnderfittedParametersAreRejected) {
  const RunLog log = pattern_log(periodic(4, 2, 10));
  EXPECT_THROW(build_timers(log, {2.0, 1.0}, {0.1, 0.0}), RecurrenceViolated);
}

TEST(CheckCondition, DegenerateConstants) {
  StabilityParams p = plain_params();
  p.mu = 1.0;
  p.lambda_u = 1.0;
  p.lambda = 0.9;
  p.eta = 0.0;
  for (double tau : {1.5, 3.0, 50.0}) {
    p.tau = tau;
    const ConditionReport r = check_condition(p);
    EXPECT_NEAR(r.lhs, 1.0 / tau, 1e-12);
    EXPECT_TRUE(r.holds);
  }
}

TEST(CheckCondition, AlwaysDetectingFails) {
  StabilityParams p = plain_params();
  p.eta = 1.0;
  p.lambda_u = 1.5;
  EXPECT_FALSE(check_condition(p).holds);
}

TEST(CheckCondition, ReferenceRatesWithFrequentSwitchingFail) {
  const ScenarioConfig cfg = [] {
    ScenarioConfig c;
    c.spectral = {0.3, 1.1};
    return c;
  }();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const PreparedScenario ps = prepare_scenario(cfg, seed);
    ASSERT_TRUE(ps.library);
    StabilityParams p = base_params(*ps.library, ps.gen.plant.modes, cfg.u_max);
    p.tau = 8.0;
    p.eta = 3.0 / 8.0;
    const ConditionReport r = check_condition(p);
    EXPECT_FALSE(r.holds) << "lhs " << r.lhs;
    EXPECT_GE(r.a, 1.0);
  }
}

TEST(CheckCondition, HoldsIffABelowOne) {
  StabilityParams p = plain_params();
  for (double tau : {2.0, 5.0, 20.0, 200.0}) {
    for (double eta : {0.0, 0.05, 0.3}) {
      p.tau = tau;
      p.eta = eta;
      const ConditionReport r = check_condition(p);
      EXPECT_EQ(r.holds, r.a_below_one);
      if (r.holds) {
        EXPECT_GT(r.a, p.lambda);
      }
    }
  }
}

TEST(IssBound, ZeroInitialStateIsConstant) {
  const StabilityParams p = plain_params();
  ASSERT_LT(p.a(), 1.0);
  const IssBound b = iss_bound(p, 0.0);
  const double expect = p.u_max * std::sqrt(p.b() * p.k / (p.lambda_under * (1.0 - p.a())));
  for (long t : {0L, 1L, 10L, 1000L}) EXPECT_NEAR(b(t), expect, 1e-12 * expect);
}

TEST(IssBound, NoInputGivesGeometricEnvelope) {
  StabilityParams p = plain_params();
  p.u_max = 0.0;
  const IssBound b = iss_bound(p, 2.0);
  for (long t : {0L, 3L, 40L}) EXPECT_NEAR(b(t), p.c() * std::pow(p.a(), 0.5 * t) * 2.0, 1e-12 * b(0));
}

TEST(IssBound, ThrowsWhenAAtLeastOne) {
  StabilityParams p = plain_params();
  p.tau = 1.0;
  p.eta = 1.0;
  ASSERT_GE(p.a(), 1.0);
  EXPECT_THROW(iss_bound(p, 1.0), ConditionUnsatisfied);
}

TEST(WCertificate, SlowSwitchingRunHoldsInEveryCase) {
  ScenarioConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.p = 3;
  cfg.T_init = 4;
  cfg.lambda = 0.5;
  cfg.mean_dwell = 200;
  cfg.horizon = 2000;
  cfg.spectral = {0.3, 0.95};
  const PreparedScenario ps = prepare_scenario(cfg, 2);
  ASSERT_TRUE(ps.library);
  const RunLog log = simulate_scenario(cfg, ps, 2);
  ASSERT_TRUE(log.ok());
  AnalysisOptions opt;
  opt.tau_grid = {50};
  opt.eta_grid = {0.05, 0.1};
  const AnalysisReport rep = analyze_run(log, *ps.library, ps.gen.plant.modes, cfg.u_max, opt);
  EXPECT_TRUE(rep.selection.condition.holds);
  EXPECT_TRUE(rep.certificate.holds());
  EXPECT_TRUE(rep.certificate.all_cases_exercised());
  EXPECT_EQ(rep.certificate.U_range_violations, 0);
  EXPECT_EQ(rep.certificate.chain_violations, 0);
  EXPECT_EQ(rep.certificate.lower_bound_violations, 0);
  EXPECT_EQ(rep.counting_violations, 0);
  ASSERT_FALSE(rep.bound.empty());
  EXPECT_EQ(rep.bound_violations, 0);
  EXPECT_NO_THROW(rep.certificate.require());
  for (const auto& s : rep.certificate.steps) {
    if (s.proof_case == 3 && !log.steps[static_cast<std::size_t>(s.t)].triggered) {
      EXPECT_LE(s.log_W_next, rep.params.log_a() + s.log_W + 1e-8);
    }
  }
}
