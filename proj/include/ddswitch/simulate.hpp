#pragma once

/**
 * @file simulate.hpp
 * @brief Closed-loop harness: plant, hidden switching signal and controller
 *        stepped together, with a per-step log.
 */

#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ddswitch/controller.hpp"
#include "ddswitch/detection.hpp"
#include "ddswitch/phase.hpp"
#include "ddswitch/plant.hpp"

namespace ddswitch {

struct StepRecord {
  long t = 0;
  Vector x;
  Vector u;
  std::size_t sigma_true = 0;
  std::optional<std::size_t> sigma_d;
  Phase phase = Phase::Detect;
  /// x^T P x for sigma_d, when a mode has been selected.
  std::optional<double> V;
  bool triggered = false;
  /// Candidate set after this step's observation (detection steps only).
  MatchSet matches;
};

enum class RunStatus { Ok, EmptyMatchSet, NoExcitation };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::EmptyMatchSet: return "empty_match_set";
    case RunStatus::NoExcitation: return "no_excitation_direction";
  }
  return "?";
}

struct RunLog {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::uint64_t seed = 0;
  bool seed_violation = false;
  std::vector<StepRecord> steps;
  /// State after the last logged step.
  Vector x_final;
  /// First instants of each detection / stabilization phase.
  std::vector<long> detect_starts;
  std::vector<long> stabilize_starts;
  /// Mode selected at the end of each completed detection phase.
  std::vector<std::size_t> resolved_modes;
  /// Controller phase and selected mode after the last logged step.
  Phase final_phase = Phase::Detect;
  std::optional<std::size_t> final_sigma_d;
  RunStatus status = RunStatus::Ok;
  std::string error;

  long horizon() const { return static_cast<long>(steps.size()); }
  bool ok() const { return status == RunStatus::Ok; }

  /// State at time t for 0 <= t <= horizon().
  const Vector& state(long t) const {
    return t == horizon() ? x_final : steps.at(static_cast<std::size_t>(t)).x;
  }
};

/// Lengths of the detection phases that ended inside the log.
inline std::vector<long> detection_lengths(const RunLog& log) {
  std::vector<long> out;
  for (std::size_t i = 0; i < log.detect_starts.size(); ++i) {
    if (i < log.stabilize_starts.size()) out.push_back(log.stabilize_starts[i] - log.detect_starts[i]);
  }
  return out;
}

/**
 * Runs the loop for `horizon` steps. Each step: read the phase, query the
 * hidden signal, compute the input, advance the plant, let the controller
 * observe the transition. Controller failures end the log early and are
 * reported through RunLog::status.
 */
inline RunLog run_closed_loop(const SwitchedPlant& plant, const ModeLibrary& library, const SignalSpec& signal,
                              const Vector& x0, long horizon, const ControllerOptions& opt = {},
                              std::uint64_t seed = 0) {
  if (horizon < 1) throw std::invalid_argument("run_closed_loop: horizon must be >= 1");
  plant.validate();
  if (library.p() != plant.p() || library.n() != plant.n() || library.m() != plant.m()) {
    throw DimensionError("run_closed_loop: library does not match plant dimensions");
  }
  RunLog log;
  log.n = plant.n();
  log.m = plant.m();
  log.seed = seed;
  log.seed_violation = opt.seed_violation;
  log.steps.reserve(static_cast<std::size_t>(horizon));

  SwitchingSignal sig(signal, plant.p());
  SwitchedController ctrl(library, opt, x0);
  Vector x = x0;
  std::optional<Phase> prev;
  for (long t = 0; t < horizon; ++t) {
    const Phase ph = ctrl.phase();
    if (!prev || *prev != ph) (ph == Phase::Detect ? log.detect_starts : log.stabilize_starts).push_back(t);
    prev = ph;

    StepRecord rec;
    rec.t = t;
    rec.x = x;
    rec.phase = ph;
    rec.sigma_d = ctrl.sigma_d();
    rec.V = ctrl.lyapunov(x);
    rec.sigma_true = sig.mode_at(t, ph);
    try {
      rec.u = ctrl.control(x);
    } catch (const NoExcitationDirection& e) {
      log.status = RunStatus::NoExcitation;
      log.error = e.what();
      break;
    } catch (const EmptyMatchSet& e) {
      log.status = RunStatus::EmptyMatchSet;
      log.error = e.what();
      break;
    }
    const Vector x_next = plant.step(rec.sigma_true, x, rec.u);
    try {
      const ObserveEvent ev = ctrl.observe(x, rec.u, x_next);
      rec.triggered = ev.triggered;
      if (ev.resolved) log.resolved_modes.push_back(*ev.resolved);
    } catch (const EmptyMatchSet& e) {
      log.status = RunStatus::EmptyMatchSet;
      log.error = e.what();
      rec.matches = MatchSet{};
      log.steps.push_back(std::move(rec));
      x = x_next;
      break;
    }
    if (ph == Phase::Detect) rec.matches = ctrl.state().det.matches;
    if (ph == Phase::Detect && ctrl.phase() == Phase::Stabilize) rec.matches = MatchSet({*ctrl.sigma_d()});
    log.steps.push_back(std::move(rec));
    x = x_next;
  }
  log.x_final = x;
  log.final_phase = ctrl.phase();
  log.final_sigma_d = ctrl.sigma_d();
  return log;
}

/// Steps whose logged transition differs from the plant's update (compared exactly).
inline std::vector<long> audit_transitions(const RunLog& log, const SwitchedPlant& plant) {
  std::vector<long> bad;
  for (long t = 0; t < log.horizon(); ++t) {
    const auto& r = log.steps[static_cast<std::size_t>(t)];
    if (plant.step(r.sigma_true, r.x, r.u) != log.state(t + 1)) bad.push_back(t);
  }
  return bad;
}

/// Event lists interleave strictly and every completed detection phase lasts at most n + m steps.
inline bool audit_phases(const RunLog& log, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const auto& d = log.detect_starts;
  const auto& s = log.stabilize_starts;
  if (d.empty() || d.front() != 0) return fail("no detection phase at t = 0");
  if (s.size() != d.size() && s.size() + 1 != d.size()) return fail("event lists out of step");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i < s.size() && !(d[i] < s[i])) return fail("detection start not before stabilization start");
    if (i + 1 < d.size() && !(i < s.size() && s[i] < d[i + 1])) return fail("events do not interleave");
  }
  for (long len : detection_lengths(log)) {
    if (len > log.n + log.m) return fail("detection phase of " + std::to_string(len) + " steps");
  }
  return true;
}

/// Controller decisions recomputed from a log.
struct ReplayStep {
  long t = 0;
  Phase phase = Phase::Detect;
  std::optional<std::size_t> sigma_d;
  bool triggered = false;
  MatchSet matches;
};

struct ReplayResult {
  std::vector<ReplayStep> steps;
  /// Steps where the replay disagrees with the log (input, phase, selection, trigger or candidates).
  std::vector<long> mismatches;
  ControllerState final_state;
  std::string error;
};

/**
 * Feeds the logged transitions to a fresh controller and compares every
 * decision with the log. The replay stops where the log stopped.
 */
inline ReplayResult replay_controller(const RunLog& log, const ModeLibrary& library, const ControllerOptions& opt) {
  ReplayResult out;
  if (log.horizon() < 1) {
    out.error = "empty log";
    return out;
  }
  SwitchedController ctrl(library, opt, log.steps.front().x);
  for (long t = 0; t < log.horizon(); ++t) {
    const auto& r = log.steps[static_cast<std::size_t>(t)];
    ReplayStep st;
    st.t = t;
    st.phase = ctrl.phase();
    st.sigma_d = ctrl.sigma_d();
    bool same = st.phase == r.phase && st.sigma_d == r.sigma_d;
    try {
      same = same && ctrl.control(r.x) == r.u;
      const ObserveEvent ev = ctrl.observe(r.x, r.u, log.state(t + 1));
      st.triggered = ev.triggered;
      if (st.phase == Phase::Detect) {
        st.matches = ctrl.phase() == Phase::Stabilize ? MatchSet({*ctrl.sigma_d()}) : ctrl.state().det.matches;
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    same = same && st.triggered == r.triggered && st.matches == r.matches;
    if (!same) out.mismatches.push_back(t);
    out.steps.push_back(std::move(st));
    if (!out.error.empty()) break;
  }
  out.final_state = ctrl.state();
  return out;
}

/// Runs `job(seed)` for every seed, as independent asynchronous tasks.
inline std::vector<RunLog> run_batch(const std::vector<std::uint64_t>& seeds,
                                     const std::function<RunLog(std::uint64_t)>& job) {
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  std::vector<RunLog> out;
  out.reserve(seeds.size());
  for (std::size_t start = 0; start < seeds.size(); start += width) {
    std::vector<std::future<RunLog>> batch;
    for (std::size_t i = start; i < std::min(seeds.size(), start + width); ++i) {
      batch.push_back(std::async(std::launch::async, job, seeds[i]));
    }
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

}  // namespace ddswitch
