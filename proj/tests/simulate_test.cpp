#include <gtest/gtest.h>

#include "ddswitch/analysis.hpp"
#include "ddswitch/scenario.hpp"
#include "ddswitch/simulate.hpp"

using namespace ddswitch;

namespace {

ScenarioConfig reference() {
  ScenarioConfig cfg;
  cfg.spectral = {0.3, 1.1};
  return cfg;
}

}  // namespace

TEST(RunClosedLoop, SingleModeDetectsOnceThenDecays) {
  ScenarioConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.p = 1;
  cfg.T_init = 5;
  cfg.horizon = 80;
  const PreparedScenario ps = prepare_scenario(cfg, 3);
  ASSERT_TRUE(ps.library);
  const RunLog log = simulate_scenario(cfg, ps, 3);
  ASSERT_TRUE(log.ok());
  EXPECT_EQ(log.detect_starts.size(), 1u);
  EXPECT_EQ(log.stabilize_starts.size(), 1u);
  const long s = log.stabilize_starts.front();
  const Matrix& p = ps.library->modes[0].P;
  for (long t = s; t < log.horizon(); ++t) {
    const Vector& x = log.state(t);
    const Vector& xn = log.state(t + 1);
    EXPECT_LE(xn.dot(p * xn), cfg.lambda * x.dot(p * x) * (1.0 + 1e-9));
  }
  EXPECT_LT(log.x_final.norm(), 1e-3 * (1.0 + log.state(s).norm()));
}

TEST(RunClosedLoop, ReferenceScenarioIsBoundedAndAudited) {
  const ScenarioConfig cfg = reference();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PreparedScenario ps = prepare_scenario(cfg, seed);
    ASSERT_TRUE(ps.library) << ps.audit.detail;
    EXPECT_TRUE(ps.audit.incompatible);
    const RunLog log = simulate_scenario(cfg, ps, seed);
    ASSERT_TRUE(log.ok()) << log.error;
    EXPECT_TRUE(audit_transitions(log, ps.gen.plant).empty());
    std::string why;
    EXPECT_TRUE(audit_phases(log, &why)) << why;
    double peak = 0.0;
    for (long t = 0; t <= log.horizon(); ++t) peak = std::max(peak, log.state(t).norm());
    EXPECT_LE(peak, 20.0 * std::max(log.state(0).norm(), 1.0));
  }
}

TEST(RunClosedLoop, ZeroInitialStateStaysWithinConstantBound) {
  ScenarioConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.p = 3;
  cfg.T_init = 4;
  cfg.lambda = 0.5;
  cfg.mean_dwell = 200;
  cfg.horizon = 1000;
  cfg.spectral = {0.3, 0.95};
  cfg.x0_scale = 0.0;
  const PreparedScenario ps = prepare_scenario(cfg, 2);
  ASSERT_TRUE(ps.library);
  const RunLog log = simulate_scenario(cfg, ps, 2);
  ASSERT_TRUE(log.ok());
  EXPECT_EQ(log.state(0).norm(), 0.0);
  // The first detection step has no earlier sample, so its input is zero.
  EXPECT_EQ(log.steps.front().u.norm(), 0.0);
  for (const auto& r : log.steps) {
    if (r.phase == Phase::Detect) {
      EXPECT_LE(r.u.norm(), cfg.u_max * (1.0 + 1e-12));
    }
  }
  AnalysisOptions opt;
  opt.tau_grid = {50};
  opt.eta_grid = {0.05, 0.1};
  const AnalysisReport rep = analyze_run(log, *ps.library, ps.gen.plant.modes, cfg.u_max, opt);
  ASSERT_FALSE(rep.bound.empty());
  for (double b : rep.bound) EXPECT_EQ(b, rep.bound.front());
  EXPECT_NEAR(rep.bound.front(), rep.params.r_const(), 1e-12 * rep.params.r_const());
  EXPECT_EQ(rep.bound_violations, 0);
}

TEST(RunClosedLoop, ReplayIsBitIdentical) {
  const ScenarioConfig cfg = reference();
  const PreparedScenario ps = prepare_scenario(cfg, 4);
  ASSERT_TRUE(ps.library);
  const RunLog a = simulate_scenario(cfg, ps, 4);
  const RunLog b = simulate_scenario(cfg, prepare_scenario(cfg, 4), 4);
  ASSERT_EQ(a.horizon(), b.horizon());
  for (long t = 0; t < a.horizon(); ++t) {
    const auto& ra = a.steps[static_cast<std::size_t>(t)];
    const auto& rb = b.steps[static_cast<std::size_t>(t)];
    EXPECT_EQ(ra.x, rb.x);
    EXPECT_EQ(ra.u, rb.u);
    EXPECT_EQ(ra.sigma_true, rb.sigma_true);
    EXPECT_EQ(ra.sigma_d, rb.sigma_d);
  }
  EXPECT_EQ(a.detect_starts, b.detect_starts);
}

TEST(RunClosedLoop, ControllerReplayReproducesDecisions) {
  ScenarioConfig cfg = reference();
  for (bool seeded : {false, true}) {
    cfg.seed_violation = seeded;
    const PreparedScenario ps = prepare_scenario(cfg, 6);
    ASSERT_TRUE(ps.library);
    const RunLog log = simulate_scenario(cfg, ps, 6);
    ControllerOptions opt;
    opt.seed_violation = seeded;
    const ReplayResult rep = replay_controller(log, *ps.library, opt);
    EXPECT_TRUE(rep.mismatches.empty());
    EXPECT_EQ(rep.steps.size(), static_cast<std::size_t>(log.horizon()));
    EXPECT_EQ(rep.final_state.phase, log.final_phase);
    EXPECT_EQ(rep.final_state.sigma_d, log.final_sigma_d);
  }
}

TEST(RunClosedLoop, DetectionResolvesTheActiveMode) {
  const ScenarioConfig cfg = reference();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PreparedScenario ps = prepare_scenario(cfg, seed);
    ASSERT_TRUE(ps.library);
    const RunLog log = simulate_scenario(cfg, ps, seed);
    for (std::size_t i = 0; i < log.stabilize_starts.size(); ++i) {
      const long last = log.stabilize_starts[i] - 1;
      EXPECT_EQ(log.resolved_modes[i], log.steps[static_cast<std::size_t>(last)].sigma_true);
    }
    for (const auto& r : log.steps) {
      if (r.phase == Phase::Detect) {
        EXPECT_TRUE(r.matches.contains(r.sigma_true));
      }
    }
  }
}

TEST(RunBatch, ResultsFollowSeedOrder) {
  const ScenarioConfig cfg = reference();
  const PreparedScenario ps = prepare_scenario(cfg, 1);
  ASSERT_TRUE(ps.library);
  const auto logs = run_batch({3, 1, 2}, [&](std::uint64_t s) { return simulate_scenario(cfg, ps, s); });
  ASSERT_EQ(logs.size(), 3u);
  EXPECT_EQ(logs[0].seed, 3u);
  EXPECT_EQ(logs[2].seed, 2u);
  EXPECT_EQ(logs[1].steps.front().x, simulate_scenario(cfg, ps, 1).steps.front().x);
}

TEST(RunClosedLoop, RejectsMismatchedLibrary) {
  const ScenarioConfig cfg = reference();
  const PreparedScenario ps = prepare_scenario(cfg, 1);
  ASSERT_TRUE(ps.library);
  SwitchedPlant small{gen_modes(1, 2, 1, 5)};
  EXPECT_THROW(run_closed_loop(small, *ps.library, cfg.signal(1), Vector::Ones(2), 10), DimensionError);
}
