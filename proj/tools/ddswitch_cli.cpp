// ddswitch: batch front end for scenario generation, gain synthesis,
// closed-loop simulation, detection replay and analysis.
//
// Exit codes: 0 ok, 1 audited invariant failed, 2 assumption or
// informativity failure, 3 controller runtime error, 4 I/O, schema or usage.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddswitch/ddswitch.hpp"
#include "ddswitch/io.hpp"

using namespace ddswitch;

namespace {

enum Exit { kOk = 0, kAudit = 1, kAssumption = 2, kRuntime = 3, kIo = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out = "out";
  std::optional<double> lambda;
  std::optional<double> umax;
  bool seed_violation = false;
  std::vector<double> tau_grid;
  std::vector<double> eta_grid;
  std::string manifest;
  std::string plant;
  std::string gains;
  std::string log;
};

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  const auto dots = spec.find("..");
  if (dots == std::string::npos) throw SchemaError("--seeds: expected a..b");
  const long a = parse_long(spec.substr(0, dots), "--seeds");
  const long b = parse_long(spec.substr(dots + 2), "--seeds");
  if (a < 0 || b < a) throw SchemaError("--seeds: need 0 <= a <= b");
  std::vector<std::uint64_t> out;
  for (long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
  return out;
}

ScenarioConfig apply_overrides(ScenarioConfig cfg, const Common& c) {
  if (c.seed) cfg.seed = *c.seed;
  if (c.lambda) cfg.lambda = *c.lambda;
  if (c.umax) cfg.u_max = *c.umax;
  if (c.seed_violation) cfg.seed_violation = true;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  return cfg;
}

const char* pass(bool ok) { return ok ? "PASS" : "FAIL"; }

int cmd_gen(const Common& c) {
  if (c.config.empty()) throw SchemaError("gen: --config is required");
  const ScenarioConfig cfg = apply_overrides(read_config(c.config), c);
  const fs::path out = c.out;
  GeneratedScenario g;
  try {
    g = generate_scenario(cfg, cfg.seed);
  } catch (const GenerationFailed& e) {
    std::cerr << "gen: " << e.what() << "\n";
    return kAssumption;
  } catch (const ExcitationFailed& e) {
    std::cerr << "gen: " << e.what() << "\n";
    return kAssumption;
  }
  write_generated(out, g, cfg, cfg.seed);
  std::cout << "wrote " << (out / "plant.json").string() << ", " << (out / "manifest.json").string() << " and "
            << g.init.size() << " trajectory files\n";

  std::string informative_detail;
  for (std::size_t i = 0; i < g.init.size() && informative_detail.empty(); ++i) {
    const SynthResult r = synth_gain(g.init[i], cfg.lambda);
    if (r.status != SynthStatus::Certified) {
      informative_detail = "mode " + std::to_string(i + 1) + ": " + to_string(r.status);
    }
  }
  std::string compat_detail;
  for (std::size_t i = 0; i < g.init.size() && compat_detail.empty(); ++i) {
    for (std::size_t j = i + 1; j < g.init.size() && compat_detail.empty(); ++j) {
      if (compatible(g.init[i], g.init[j])) {
        compat_detail = "modes " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " are compatible";
      }
    }
  }
  const bool a1 = informative_detail.empty();
  const bool a2 = compat_detail.empty();
  std::cout << "assumption 1 (informativity): " << pass(a1) << (a1 ? "" : " (" + informative_detail + ")") << "\n";
  std::cout << "assumption 2 (pairwise incompatibility): " << pass(a2)
            << (a2 ? (cfg.p == 1 ? " (vacuous, p = 1)" : "") : " (" + compat_detail + ")") << "\n";
  return a1 && a2 ? kOk : kAssumption;
}

int cmd_synth(const Common& c) {
  const fs::path out = c.out;
  const fs::path mpath = or_default(c.manifest, out / "manifest.json");
  const Manifest man = read_manifest(mpath);
  double lambda = 0.8;
  if (!man.plant.empty() && fs::exists(man.plant)) lambda = read_plant(man.plant).config.lambda;
  if (c.lambda) lambda = *c.lambda;
  if (!(lambda > 0.0 && lambda < 1.0)) throw SchemaError("synth: lambda must be in (0,1)");
  ModeLibrary lib;
  try {
    lib = ModeLibrary::synthesize(man.data, lambda);
  } catch (const NotInformative& e) {
    std::cerr << "synth: not informative: " << e.what() << "\n";
    return kAssumption;
  }
  for (std::size_t i = 0; i < lib.p(); ++i) {
    const auto [lo, hi] = sym_eig_extremes(lib.modes[i].P);
    std::printf("mode %zu: certified  |K| = %.4g  eig(P) in [%.4g, %.4g]\n", i + 1, spectral_norm(lib.modes[i].K),
                lo, hi);
  }
  const fs::path gpath = out / "gains.json";
  write_json(gpath, gains_to_json(lib, man.seed, fs::relative(mpath, out).generic_string()));
  std::cout << "wrote " << gpath.string() << "\n";
  return kOk;
}

int cmd_simulate(const Common& c) {
  const fs::path out = c.out;
  const PlantFile pf = read_plant(or_default(c.plant, out / "plant.json"));
  const ModeLibrary lib = read_library(or_default(c.gains, out / "gains.json"));
  ScenarioConfig cfg = c.config.empty() ? pf.config : read_config(c.config);
  cfg = apply_overrides(cfg, c);
  if (lib.p() != pf.plant.p() || lib.n() != pf.plant.n() || lib.m() != pf.plant.m()) {
    throw SchemaError("simulate: gains do not match the plant");
  }
  const std::vector<std::uint64_t> seeds = c.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                                            : parse_seed_range(c.seeds);
  ControllerOptions opt;
  opt.u_max = cfg.u_max;
  opt.seed_violation = cfg.seed_violation;
  const auto logs = run_batch(seeds, [&](std::uint64_t s) {
    return run_closed_loop(pf.plant, lib, cfg.signal(s), random_x0(cfg, s), cfg.horizon, opt, s);
  });
  int code = kOk;
  for (const RunLog& log : logs) {
    write_runlog(out, log, cfg.u_max);
    double xmax = 0.0;
    for (long t = 0; t <= log.horizon(); ++t) xmax = std::max(xmax, log.state(t).norm());
    const auto lens = detection_lengths(log);
    const long longest = lens.empty() ? 0 : *std::max_element(lens.begin(), lens.end());
    std::string why;
    const bool phases_ok = audit_phases(log, &why);
    const bool transitions_ok = audit_transitions(log, pf.plant).empty();
    std::printf("seed %llu: %s  steps %ld  detection phases %zu (longest %ld)  max|x| %.4g%s%s\n",
                static_cast<unsigned long long>(log.seed), to_string(log.status), log.horizon(),
                log.detect_starts.size(), longest, xmax, phases_ok ? "" : ("  phase audit: " + why).c_str(),
                transitions_ok ? "" : "  transition audit: FAIL");
    if (!log.ok()) {
      std::cerr << "seed " << log.seed << ": " << log.error << "\n";
      code = kRuntime;
    } else if ((!phases_ok || !transitions_ok) && code == kOk) {
      code = kAudit;
    }
  }
  return code;
}

int cmd_detect(const Common& c) {
  const fs::path out = c.out;
  if (c.log.empty()) throw SchemaError("detect: --log is required");
  const ModeLibrary lib = read_library(or_default(c.gains, out / "gains.json"));
  const RunLogFile rf = read_runlog(c.log, lib.p());
  ControllerOptions opt;
  opt.u_max = c.umax.value_or(rf.u_max);
  opt.seed_violation = rf.log.seed_violation || c.seed_violation;
  const ReplayResult rep = replay_controller(rf.log, lib, opt);

  std::ostringstream csv;
  csv << "t,phase,sigma_d,triggered,matches\n";
  for (const auto& s : rep.steps) {
    csv << s.t << ',' << to_string(s.phase) << ',';
    if (s.sigma_d) csv << *s.sigma_d + 1;
    csv << ',' << (s.triggered ? 1 : 0) << ',' << matches_cell(s.matches) << "\n";
  }
  const std::string stem = "detect_" + std::to_string(rf.log.seed);
  write_text(out / (stem + ".csv"), csv.str());
  write_json(out / ("controller_state_" + std::to_string(rf.log.seed) + ".json"),
             controller_state_to_json(rep.final_state));
  std::cout << "replayed " << rep.steps.size() << " steps, " << rep.mismatches.size() << " mismatches\n";
  if (!rep.mismatches.empty()) {
    std::cerr << "detect: first mismatch at t = " << rep.mismatches.front() << "\n";
    return kAudit;
  }
  if (!rep.error.empty()) {
    std::cerr << "detect: " << rep.error << "\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_analyze(const Common& c) {
  const fs::path out = c.out;
  if (c.log.empty()) throw SchemaError("analyze: --log is required");
  const PlantFile pf = read_plant(or_default(c.plant, out / "plant.json"));
  const ModeLibrary lib = read_library(or_default(c.gains, out / "gains.json"));
  const RunLogFile rf = read_runlog(c.log, lib.p());
  AnalysisOptions opt;
  if (!c.tau_grid.empty()) opt.tau_grid = c.tau_grid;
  if (!c.eta_grid.empty()) opt.eta_grid = c.eta_grid;
  for (double tau : opt.tau_grid) {
    if (!(tau > 1.0)) throw SchemaError("--tau-grid: entries must be > 1");
  }
  for (double eta : opt.eta_grid) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw SchemaError("--eta-grid: entries must be in [0, 1]");
  }
  AnalysisReport rep;
  try {
    rep = analyze_run(rf.log, lib, pf.plant.modes, c.umax.value_or(rf.u_max), opt);
  } catch (const RecurrenceViolated& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return kAudit;
  }
  const std::string stem = "analysis_" + std::to_string(rf.log.seed);
  write_json(out / (stem + ".json"), analysis_to_json(rep, rf.log.seed));
  write_text(out / (stem + ".csv"), analysis_csv(rep));

  const auto& p = rep.params;
  const auto& cert = rep.certificate;
  std::printf("fit: tau %.4g N0 %.4g eta %.4g T0 %.4g\n", p.tau, p.N0, p.eta, p.T0);
  std::printf("lambda_u %.6g  k %.4g  mu %.4g  a %.6g\n", p.lambda_u, p.k, p.mu, p.a());
  std::printf("condition value %.6g (%s, margin %.4g)\n", rep.selection.condition.lhs,
              rep.selection.condition.holds ? "holds" : "fails", rep.selection.condition.margin());
  std::printf("W certificate: %s  cases %ld/%ld/%ld  violations %zu\n", pass(cert.holds()), cert.case_counts[0],
              cert.case_counts[1], cert.case_counts[2], cert.violations.size());
  if (rep.bound.empty()) {
    std::printf("state bound: not available (a >= 1)\n");
  } else {
    std::printf("state bound: %s  violations %ld\n", pass(rep.bound_violations == 0), rep.bound_violations);
  }
  const bool ok = cert.holds() && rep.counting_violations == 0 && cert.U_range_violations == 0 &&
                  cert.chain_violations == 0 && cert.lower_bound_violations == 0 && rep.bound_violations == 0;
  return ok ? kOk : kAudit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven switched-system control toolbox"};
  app.require_subcommand(1);
  Common c;

  auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", c.seed, "Scenario / run seed");
  };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", c.out, "Output directory")->capture_default_str(); };

  auto* gen = app.add_subcommand("gen", "Generate a plant and per-mode initialization trajectories");
  gen->add_option("--config", c.config, "Scenario config (JSON)")->required();
  add_seed(gen);
  add_out(gen);
  gen->add_option("--lambda", c.lambda, "Decay rate used for the informativity audit");

  auto* synth = app.add_subcommand("synth", "Synthesize one certified gain per mode");
  synth->add_option("--manifest", c.manifest, "Trajectory manifest (default <out>/manifest.json)");
  synth->add_option("--lambda", c.lambda, "Decay rate (default: from the plant config)");
  add_out(synth);

  auto* sim = app.add_subcommand("simulate", "Run the closed loop");
  sim->add_option("--config", c.config, "Scenario config overriding the one stored with the plant");
  sim->add_option("--plant", c.plant, "Plant spec (default <out>/plant.json)");
  sim->add_option("--gains", c.gains, "Gains file (default <out>/gains.json)");
  add_seed(sim);
  sim->add_option("--seeds", c.seeds, "Seed range a..b, run independently");
  sim->add_option("--umax", c.umax, "Detection input magnitude");
  sim->add_flag("--seed-violation", c.seed_violation, "Seed detection with the violating transition");
  add_out(sim);

  auto* det = app.add_subcommand("detect", "Replay the controller on a recorded run");
  det->add_option("--log", c.log, "Run log sidecar (runlog_<seed>.json)")->required();
  det->add_option("--gains", c.gains, "Gains file (default <out>/gains.json)");
  det->add_option("--umax", c.umax, "Detection input magnitude (default: from the log)");
  det->add_flag("--seed-violation", c.seed_violation, "Seed detection with the violating transition");
  add_out(det);

  auto* ana = app.add_subcommand("analyze", "Fit switching parameters and audit the stability certificate");
  ana->add_option("--log", c.log, "Run log sidecar (runlog_<seed>.json)")->required();
  ana->add_option("--plant", c.plant, "Plant spec (default <out>/plant.json)");
  ana->add_option("--gains", c.gains, "Gains file (default <out>/gains.json)");
  ana->add_option("--umax", c.umax, "Input magnitude bound (default: from the log)");
  ana->add_option("--tau-grid", c.tau_grid, "Candidate dwell-time values, comma separated")->delimiter(',');
  ana->add_option("--eta-grid", c.eta_grid, "Candidate detection-rate values, comma separated")->delimiter(',');
  add_out(ana);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  try {
    if (*gen) return cmd_gen(c);
    if (*synth) return cmd_synth(c);
    if (*sim) return cmd_simulate(c);
    if (*det) return cmd_detect(c);
    if (*ana) return cmd_analyze(c);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NotInformative& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kAssumption;
  } catch (const EmptyMatchSet& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const NoExcitationDirection& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kIo;
}
