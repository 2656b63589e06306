#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario configuration and the generate / synthesize / simulate
 *        pipeline built from it.
 */

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddswitch/controller.hpp"
#include "ddswitch/data.hpp"
#include "ddswitch/plant.hpp"
#include "ddswitch/simulate.hpp"

namespace ddswitch {

struct ScenarioConfig {
  Eigen::Index n = 5;
  Eigen::Index m = 3;
  std::size_t p = 5;
  Eigen::Index T_init = 7;
  double lambda = 0.8;
  double u_max = 1.0;
  /// Adaptive signal mean dwell; ignored when a schedule is given.
  double mean_dwell = 8.0;
  /// (time, 0-based mode) pairs for a precomputed signal.
  std::vector<std::pair<long, std::size_t>> schedule;
  long horizon = 100;
  std::uint64_t seed = 1;
  bool seed_violation = false;
  SpectralRange spectral{0.5, 1.2};
  double x0_scale = 1.0;
  double init_x0_scale = 1.0;
  double init_u_scale = 1.0;
  /// Generates every mode from this one seed (identical modes).
  std::optional<std::uint64_t> mode_seed_override;

  void validate() const {
    if (n < 1 || m < 1 || p < 1) throw std::invalid_argument("ScenarioConfig: n, m, p must be >= 1");
    if (T_init < 1) throw std::invalid_argument("ScenarioConfig: T_init must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("ScenarioConfig: lambda must be in (0,1)");
    if (!(u_max > 0.0)) throw std::invalid_argument("ScenarioConfig: u_max must be > 0");
    if (schedule.empty() && !(mean_dwell >= 1.0)) {
      throw std::invalid_argument("ScenarioConfig: mean_dwell must be >= 1");
    }
    if (horizon < 1) throw std::invalid_argument("ScenarioConfig: horizon must be >= 1");
    if (!(spectral.lo >= 0.0 && spectral.hi >= spectral.lo)) {
      throw std::invalid_argument("ScenarioConfig: bad spectral range");
    }
    if (!(x0_scale >= 0.0 && init_x0_scale > 0.0 && init_u_scale > 0.0)) {
      throw std::invalid_argument("ScenarioConfig: scales must be positive");
    }
  }

  SignalSpec signal(std::uint64_t run_seed) const {
    if (!schedule.empty()) return PrecomputedSignal{schedule};
    return AdaptiveSignal{mean_dwell, run_seed ^ 0x9e3779b97f4a7c15ULL};
  }
};

/// Seeds derived from the scenario seed for each generated artifact.
struct SeedPlan {
  static std::uint64_t modes(std::uint64_t s) { return s * 1000003ULL + 11; }
  static std::uint64_t init(std::uint64_t s, std::size_t i) { return s * 1000003ULL + 101 + 7919ULL * i; }
  static std::uint64_t x0(std::uint64_t s) { return s * 1000003ULL + 17; }
};

struct GeneratedScenario {
  SwitchedPlant plant;
  std::vector<DataMatrices> init;
};

struct AssumptionAudit {
  /// Every dataset admits a certified gain.
  bool informative = false;
  /// No two datasets are compatible.
  bool incompatible = false;
  std::string detail;
};

inline GeneratedScenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GeneratedScenario g;
  if (cfg.mode_seed_override) {
    const SystemPair one = gen_modes(*cfg.mode_seed_override, cfg.n, cfg.m, 1, cfg.spectral).front();
    g.plant.modes.assign(cfg.p, one);
  } else {
    g.plant.modes = gen_modes(SeedPlan::modes(seed), cfg.n, cfg.m, cfg.p, cfg.spectral);
  }
  for (std::size_t i = 0; i < cfg.p; ++i) {
    g.init.push_back(gen_init_data(g.plant.modes[i], cfg.T_init, SeedPlan::init(seed, i), cfg.init_x0_scale,
                                   cfg.init_u_scale));
  }
  return g;
}

inline Vector random_x0(const ScenarioConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(SeedPlan::x0(seed));
  return detail::gaussian_matrix(cfg.n, 1, rng, cfg.x0_scale);
}

/// Generated plant plus a certified library, or the audit explaining why not.
struct PreparedScenario {
  GeneratedScenario gen;
  std::optional<ModeLibrary> library;
  AssumptionAudit audit;
};

inline PreparedScenario prepare_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                                         const SynthOptions& synth = {}) {
  PreparedScenario ps;
  ps.gen = generate_scenario(cfg, seed);
  ps.audit.incompatible = pairwise_incompatible(ps.gen.init);
  try {
    ps.library = ModeLibrary::synthesize(ps.gen.init, cfg.lambda, synth);
    ps.audit.informative = true;
  } catch (const NotInformative& e) {
    ps.audit.detail = e.what();
  }
  if (!ps.audit.incompatible) {
    ps.audit.detail += (ps.audit.detail.empty() ? "" : "; ") + std::string("two datasets are compatible");
  }
  return ps;
}

inline RunLog simulate_scenario(const ScenarioConfig& cfg, const PreparedScenario& ps, std::uint64_t seed) {
  if (!ps.library) throw NotInformative("simulate_scenario: no certified library");
  ControllerOptions opt;
  opt.u_max = cfg.u_max;
  opt.seed_violation = cfg.seed_violation;
  return run_closed_loop(ps.gen.plant, *ps.library, cfg.signal(seed), random_x0(cfg, seed), cfg.horizon, opt,
                         seed);
}

}  // namespace ddswitch
