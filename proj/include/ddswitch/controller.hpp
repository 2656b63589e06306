#pragma once

/**
 * @file controller.hpp
 * @brief Two-phase switched feedback controller: detection until a single
 *        library mode remains, then that mode's gain until the Lyapunov
 *        decrease check fails.
 */

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddswitch/data.hpp"
#include "ddswitch/detection.hpp"
#include "ddswitch/lmi.hpp"
#include "ddswitch/phase.hpp"

namespace ddswitch {

/// Thrown when some library mode has no certified gain.
class NotInformative : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModeEntry {
  DataMatrices data;
  Matrix K;
  Matrix P;
};

struct ModeLibrary {
  std::vector<ModeEntry> modes;
  double lambda = 0.8;

  std::size_t p() const { return modes.size(); }
  Eigen::Index n() const { return modes.empty() ? 0 : modes.front().data.n(); }
  Eigen::Index m() const { return modes.empty() ? 0 : modes.front().data.m(); }

  std::vector<DataMatrices> init_data() const {
    std::vector<DataMatrices> out;
    out.reserve(modes.size());
    for (const auto& e : modes) out.push_back(e.data);
    return out;
  }
  std::vector<Matrix> certificates() const {
    std::vector<Matrix> out;
    out.reserve(modes.size());
    for (const auto& e : modes) out.push_back(e.P);
    return out;
  }

  void validate() const {
    if (modes.empty()) throw std::invalid_argument("ModeLibrary: empty");
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("ModeLibrary: lambda must be in (0,1)");
    for (const auto& e : modes) {
      if (e.data.n() != n() || e.data.m() != m() || e.K.rows() != m() || e.K.cols() != n() ||
          e.P.rows() != n() || e.P.cols() != n()) {
        throw DimensionError("ModeLibrary: inconsistent dimensions");
      }
    }
  }

  /// Synthesizes one certified gain per dataset.
  static ModeLibrary synthesize(const std::vector<DataMatrices>& data, double lambda,
                                const SynthOptions& opt = {}) {
    ModeLibrary lib;
    lib.lambda = lambda;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const SynthResult r = synth_gain(data[i], lambda, opt);
      if (r.status != SynthStatus::Certified) {
        throw NotInformative("mode " + std::to_string(i + 1) + ": " + to_string(r.status) +
                             (r.detail.empty() ? "" : " (" + r.detail + ")"));
      }
      lib.modes.push_back({data[i], r.certificate->K, r.certificate->P});
    }
    return lib;
  }
};

struct ControllerOptions {
  double u_max = 1.0;
  /// Seed the next detection phase with the violating transition.
  bool seed_violation = false;
  /// Relative slack on the decrease check.
  double trigger_slack = 1e-9;
  DetectionOptions detection{};
};

struct ControllerState {
  Phase phase = Phase::Detect;
  std::optional<std::size_t> sigma_d;
  DetectionState det;
};

/// What observe() did with the transition it was given.
struct ObserveEvent {
  bool triggered = false;
  std::optional<std::size_t> resolved;
};

class SwitchedController {
 public:
  SwitchedController(ModeLibrary library, ControllerOptions opt, const Vector& x0)
      : lib_(std::move(library)), opt_(opt), init_(lib_.init_data()) {
    lib_.validate();
    if (x0.size() != lib_.n()) throw DimensionError("SwitchedController: x0 dimension mismatch");
    state_.det = DetectionState::start(x0, lib_.m(), lib_.p(), opt_.u_max);
  }

  /// Resumes from a snapshot.
  SwitchedController(ModeLibrary library, ControllerOptions opt, ControllerState state)
      : lib_(std::move(library)), opt_(opt), init_(lib_.init_data()), state_(std::move(state)) {
    lib_.validate();
  }

  const ModeLibrary& library() const { return lib_; }
  const ControllerOptions& options() const { return opt_; }
  const ControllerState& state() const { return state_; }
  Phase phase() const { return state_.phase; }
  std::optional<std::size_t> sigma_d() const { return state_.sigma_d; }

  /// x^T P x for the currently selected mode; nothing before the first resolution.
  std::optional<double> lyapunov(const Vector& x) const {
    if (!state_.sigma_d) return std::nullopt;
    return x.dot(lib_.modes[*state_.sigma_d].P * x);
  }

  Vector control(const Vector& x) const {
    if (x.size() != lib_.n()) throw DimensionError("control: state dimension mismatch");
    if (state_.phase == Phase::Detect) return detect_input(state_.det, x, opt_.detection);
    return lib_.modes[*state_.sigma_d].K * x;
  }

  ObserveEvent observe(const Vector& x, const Vector& u, const Vector& x_next) {
    ObserveEvent ev;
    if (state_.phase == Phase::Detect) {
      state_.det = detect_update(state_.det, u, x_next, init_, opt_.detection);
      ev.resolved = is_resolved(state_.det);
      if (ev.resolved) {
        state_.sigma_d = ev.resolved;
        state_.det.matches = MatchSet::all(lib_.p());
        state_.phase = Phase::Stabilize;
      }
      return ev;
    }
    const Matrix& p = lib_.modes[*state_.sigma_d].P;
    const double v = x.dot(p * x);
    const double v_next = x_next.dot(p * x_next);
    if (v_next > lib_.lambda * v * (1.0 + opt_.trigger_slack)) {
      ev.triggered = true;
      state_.phase = Phase::Detect;
      if (opt_.seed_violation) {
        Matrix xs(lib_.n(), 2);
        xs << x, x_next;
        state_.det = {DataMatrices(std::move(xs), Matrix(u)), MatchSet::all(lib_.p()), opt_.u_max};
        state_.det.matches = prune_matches(state_.det.matches, init_, state_.det.online,
                                           opt_.detection.rank_tol);
      } else {
        state_.det = DetectionState::start(x_next, lib_.m(), lib_.p(), opt_.u_max);
      }
    }
    return ev;
  }

 private:
  ModeLibrary lib_;
  ControllerOptions opt_;
  std::vector<DataMatrices> init_;
  ControllerState state_;
};

}  // namespace ddswitch
