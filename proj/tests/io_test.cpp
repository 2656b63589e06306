#include <filesystem>

#include <gtest/gtest.h>

#include "ddswitch/io.hpp"

using namespace ddswitch;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddswitch_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.p = 3;
  cfg.T_init = 4;
  cfg.horizon = 60;
  cfg.spectral = {0.3, 1.1};
  return cfg;
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  }
  EXPECT_THROW(parse_double("1.5x", "test"), SchemaError);
}

TEST(Config, DefaultsAndRoundTrip) {
  ScenarioConfig cfg = small_config();
  cfg.schedule = {{0, 1}, {10, 2}};
  cfg.mode_seed_override = 9;
  const ScenarioConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(back.n, cfg.n);
  EXPECT_EQ(back.schedule, cfg.schedule);
  EXPECT_EQ(back.mode_seed_override, cfg.mode_seed_override);
  EXPECT_EQ(back.spectral.hi, cfg.spectral.hi);
  const ScenarioConfig def = config_from_json(json::object());
  EXPECT_EQ(def.n, 5);
  EXPECT_EQ(def.lambda, 0.8);
}

TEST(Config, SchemaViolations) {
  EXPECT_THROW(config_from_json(json{{"nn", 3}}), SchemaError);
  EXPECT_THROW(config_from_json(json{{"n", "three"}}), SchemaError);
  EXPECT_THROW(config_from_json(json{{"lambda", 1.5}}), SchemaError);
  EXPECT_THROW(config_from_json(json{{"p", 2}, {"schedule", {{0, 3}}}}), SchemaError);
  EXPECT_THROW(config_from_json(json::array()), SchemaError);
}

TEST(Trajectory, CsvLayoutAndRoundTrip) {
  const auto modes = gen_modes(1, 2, 1, 1);
  const DataMatrices d = gen_init_data(modes[0], 3, 4);
  const std::string csv = trajectory_csv(d);
  const auto lines = split(csv, '\n');
  EXPECT_EQ(lines.front(), "t,x1,x2,u1");
  EXPECT_EQ(lines[4].substr(lines[4].size() - 1), ",");
  const DataMatrices back = trajectory_from_csv(lines, "mem");
  EXPECT_EQ(back.X(), d.X());
  EXPECT_EQ(back.U_minus(), d.U_minus());
}

TEST(Trajectory, RejectsMalformedRows) {
  EXPECT_THROW(trajectory_from_csv({"t,x1,u1", "0,1,2", "1,2,3"}, "mem"), SchemaError);
  EXPECT_THROW(trajectory_from_csv({"t,x1,u1", "0,1", "1,2,"}, "mem"), SchemaError);
  EXPECT_THROW(trajectory_from_csv({"t,y1,u1", "0,1,"}, "mem"), SchemaError);
  EXPECT_THROW(trajectory_from_csv({"t,x1,u1", "0,1,1", "2,2,"}, "mem"), SchemaError);
}

TEST(Files, GeneratedScenarioRoundTrip) {
  const fs::path dir = scratch("gen");
  const ScenarioConfig cfg = small_config();
  const GeneratedScenario g = generate_scenario(cfg, 5);
  write_generated(dir, g, cfg, 5);
  const PlantFile pf = read_plant(dir / "plant.json");
  EXPECT_EQ(pf.seed, 5u);
  ASSERT_EQ(pf.plant.p(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(pf.plant.modes[i].A, g.plant.modes[i].A);
    EXPECT_EQ(pf.plant.modes[i].B, g.plant.modes[i].B);
  }
  const Manifest man = read_manifest(dir / "manifest.json");
  ASSERT_EQ(man.data.size(), 3u);
  EXPECT_EQ(man.data[2].X(), g.init[2].X());
  EXPECT_EQ(man.plant, dir / "plant.json");
}

TEST(Files, GainsRebuildLibrary) {
  const fs::path dir = scratch("gains");
  const ScenarioConfig cfg = small_config();
  const PreparedScenario ps = prepare_scenario(cfg, 2);
  ASSERT_TRUE(ps.library);
  write_generated(dir, ps.gen, cfg, 2);
  write_json(dir / "gains.json", gains_to_json(*ps.library, 2));
  const ModeLibrary lib = read_library(dir / "gains.json");
  EXPECT_EQ(lib.lambda, ps.library->lambda);
  for (std::size_t i = 0; i < lib.p(); ++i) {
    EXPECT_EQ(lib.modes[i].K, ps.library->modes[i].K);
    EXPECT_EQ(lib.modes[i].P, ps.library->modes[i].P);
  }
}

TEST(Files, RunLogRoundTripAndReplay) {
  const fs::path dir = scratch("runlog");
  ScenarioConfig cfg = small_config();
  cfg.seed_violation = true;
  const PreparedScenario ps = prepare_scenario(cfg, 3);
  ASSERT_TRUE(ps.library);
  const RunLog log = simulate_scenario(cfg, ps, 3);
  const fs::path path = write_runlog(dir, log, cfg.u_max);
  const RunLogFile back = read_runlog(path, cfg.p);
  EXPECT_EQ(back.u_max, cfg.u_max);
  EXPECT_TRUE(back.log.seed_violation);
  EXPECT_EQ(back.log.detect_starts, log.detect_starts);
  EXPECT_EQ(back.log.stabilize_starts, log.stabilize_starts);
  EXPECT_EQ(back.log.resolved_modes, log.resolved_modes);
  EXPECT_EQ(back.log.x_final, log.x_final);
  ASSERT_EQ(back.log.horizon(), log.horizon());
  for (long t = 0; t < log.horizon(); ++t) {
    const auto& a = log.steps[static_cast<std::size_t>(t)];
    const auto& b = back.log.steps[static_cast<std::size_t>(t)];
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.sigma_d, b.sigma_d);
    EXPECT_EQ(a.V, b.V);
    EXPECT_EQ(a.matches, b.matches);
  }
  ControllerOptions opt;
  opt.seed_violation = true;
  EXPECT_TRUE(replay_controller(back.log, *ps.library, opt).mismatches.empty());
  EXPECT_EQ(runlog_csv(back.log), runlog_csv(log));
}

TEST(Files, RunLogCsvHeader) {
  RunLog log;
  log.n = 2;
  log.m = 1;
  EXPECT_EQ(runlog_csv(log), "t,phase,sigma_true,sigma_d,V,triggered,matches,x1,x2,u1\n");
}

TEST(Files, ControllerStateRoundTrip) {
  ControllerState st;
  st.phase = Phase::Detect;
  st.sigma_d = 1;
  st.det = DetectionState::start(Vector::Ones(2), 1, 3, 0.5);
  st.det.online = st.det.online.appended(Vector::Constant(1, 0.25), Vector::Zero(2));
  st.det.matches = MatchSet({0, 2});
  const ControllerState back = controller_state_from_json(controller_state_to_json(st), 3);
  EXPECT_EQ(back.phase, st.phase);
  EXPECT_EQ(back.sigma_d, st.sigma_d);
  EXPECT_EQ(back.det.u_max, 0.5);
  EXPECT_EQ(back.det.online.X(), st.det.online.X());
  EXPECT_EQ(back.det.online.U_minus(), st.det.online.U_minus());
  EXPECT_EQ(back.det.matches, st.det.matches);
}

TEST(Files, FreshControllerStateRoundTrip) {
  ControllerState st;
  st.det = DetectionState::start(Vector::Ones(2), 2, 2, 1.0);
  const ControllerState back = controller_state_from_json(controller_state_to_json(st), 2);
  EXPECT_EQ(back.det.online.T(), 0);
  EXPECT_EQ(back.det.online.m(), 2);
  EXPECT_FALSE(back.sigma_d.has_value());
}

TEST(Files, MissingFileIsIoError) {
  EXPECT_THROW(read_manifest(fs::temp_directory_path() / "ddswitch_no_such_dir" / "manifest.json"), IoError);
}

TEST(Files, WrongFormatTagIsSchemaError) {
  const fs::path dir = scratch("format");
  write_json(dir / "x.json", json{{"format", "something.else"}});
  EXPECT_THROW(read_plant(dir / "x.json"), SchemaError);
}

TEST(Files, AnalysisReportColumns) {
  ScenarioConfig cfg = small_config();
  const PreparedScenario ps = prepare_scenario(cfg, 2);
  ASSERT_TRUE(ps.library);
  const RunLog log = simulate_scenario(cfg, ps, 2);
  const AnalysisReport rep = analyze_run(log, *ps.library, ps.gen.plant.modes, cfg.u_max);
  const std::string csv = analysis_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x_norm,bound,W,log_W,tau_d,tau_a");
  EXPECT_EQ(static_cast<long>(std::count(csv.begin(), csv.end(), '\n')), log.horizon() + 2);
  const json j = analysis_to_json(rep, 2);
  EXPECT_EQ(j["condition"]["holds"].get<bool>(), rep.selection.condition.holds);
  EXPECT_EQ(j["violations"]["certificate"].get<std::size_t>(), rep.certificate.violations.size());
}
