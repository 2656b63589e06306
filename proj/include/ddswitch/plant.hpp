#pragma once

/**
 * @file plant.hpp
 * @brief Ground-truth switched linear plant, switching signals, and random
 *        scenario generation (modes plus per-mode initialization data).
 */

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ddswitch/data.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/phase.hpp"

namespace ddswitch {

class GenerationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExcitationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SwitchedPlant {
  std::vector<SystemPair> modes;

  Eigen::Index n() const { return modes.empty() ? 0 : modes.front().A.rows(); }
  Eigen::Index m() const { return modes.empty() ? 0 : modes.front().B.cols(); }
  std::size_t p() const { return modes.size(); }

  void validate() const {
    if (modes.empty()) throw std::invalid_argument("SwitchedPlant: no modes");
    for (const auto& md : modes) {
      if (md.A.rows() != n() || md.A.cols() != n() || md.B.rows() != n() || md.B.cols() != m()) {
        throw DimensionError("SwitchedPlant: inconsistent mode dimensions");
      }
      require_finite(md.A, "SwitchedPlant");
      require_finite(md.B, "SwitchedPlant");
    }
  }

  Vector step(std::size_t mode, const Vector& x, const Vector& u) const {
    const auto& md = modes.at(mode);
    if (x.size() != md.A.cols() || u.size() != md.B.cols()) {
      throw DimensionError("SwitchedPlant::step: dimension mismatch");
    }
    return md.A * x + md.B * u;
  }
};

/// Fixed (time, mode) schedule; the mode holds until the next entry.
struct PrecomputedSignal {
  std::vector<std::pair<long, std::size_t>> schedule;
};

/// Geometric dwell times with the given mean; a switch that falls due while
/// the controller is detecting is deferred to its first stabilization step.
struct AdaptiveSignal {
  double mean_dwell = 8.0;
  std::uint64_t seed = 0;
};

using SignalSpec = std::variant<PrecomputedSignal, AdaptiveSignal>;

/// Stateful realization of a SignalSpec; query with consecutive t = 0, 1, ...
class SwitchingSignal {
 public:
  SwitchingSignal(SignalSpec spec, std::size_t p) : spec_(std::move(spec)), p_(p) {
    if (p_ == 0) throw std::invalid_argument("SwitchingSignal: p must be >= 1");
    if (auto* pre = std::get_if<PrecomputedSignal>(&spec_)) {
      if (pre->schedule.empty() || pre->schedule.front().first != 0) {
        throw std::invalid_argument("SwitchingSignal: schedule must start at t = 0");
      }
      for (std::size_t i = 0; i < pre->schedule.size(); ++i) {
        if (pre->schedule[i].second >= p_) throw std::out_of_range("SwitchingSignal: mode out of range");
        if (i > 0 && pre->schedule[i].first <= pre->schedule[i - 1].first) {
          throw std::invalid_argument("SwitchingSignal: schedule times must strictly increase");
        }
      }
      current_ = pre->schedule.front().second;
    } else {
      const auto& ad = std::get<AdaptiveSignal>(spec_);
      if (!(ad.mean_dwell >= 1.0)) throw std::invalid_argument("SwitchingSignal: mean_dwell must be >= 1");
      rng_.seed(ad.seed);
      current_ = std::uniform_int_distribution<std::size_t>(0, p_ - 1)(rng_);
      next_switch_ = draw_dwell();
    }
  }

  std::size_t mode_at(long t, Phase controller_phase) {
    if (auto* pre = std::get_if<PrecomputedSignal>(&spec_)) {
      while (cursor_ + 1 < pre->schedule.size() && pre->schedule[cursor_ + 1].first <= t) ++cursor_;
      current_ = pre->schedule[cursor_].second;
      return current_;
    }
    if (t >= next_switch_ && controller_phase == Phase::Stabilize) {
      if (p_ > 1) {
        std::size_t other = std::uniform_int_distribution<std::size_t>(0, p_ - 2)(rng_);
        current_ = other >= current_ ? other + 1 : other;
      }
      next_switch_ = t + draw_dwell();
    }
    return current_;
  }

 private:
  long draw_dwell() {
    const double q = 1.0 / std::get<AdaptiveSignal>(spec_).mean_dwell;
    if (q >= 1.0) return 1;
    return 1 + static_cast<long>(std::geometric_distribution<long>(q)(rng_));
  }

  SignalSpec spec_;
  std::size_t p_;
  std::size_t current_ = 0;
  std::size_t cursor_ = 0;
  long next_switch_ = 0;
  std::mt19937_64 rng_;
};

struct SpectralRange {
  double lo = 0.5;
  double hi = 1.2;
};

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  Matrix out = Matrix::Zero(r, c);
  if (scale == 0.0) return out;
  std::normal_distribution<double> g(0.0, scale);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = g(rng);
  return out;
}

}  // namespace detail

/// Random controllable modes with spectral radius of A drawn in the range.
inline std::vector<SystemPair> gen_modes(std::uint64_t seed, Eigen::Index n, Eigen::Index m, std::size_t p,
                                         SpectralRange range = {}) {
  if (n < 1 || m < 1 || p < 1) throw std::invalid_argument("gen_modes: n, m, p must be >= 1");
  if (!(range.lo >= 0.0 && range.hi >= range.lo)) throw std::invalid_argument("gen_modes: bad spectral range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> target(range.lo, range.hi);
  std::vector<SystemPair> modes;
  modes.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Matrix a = detail::gaussian_matrix(n, n, rng);
      const double rho = spectral_radius(a);
      if (rho < 1e-6) continue;
      a *= target(rng) / rho;
      Matrix b = detail::gaussian_matrix(n, m, rng);
      if (is_controllable(a, b, Tolerance{1e-8, 1e-9})) {
        modes.push_back({std::move(a), std::move(b)});
        ok = true;
      }
    }
    if (!ok) throw GenerationFailed("gen_modes: no controllable pair for mode " + std::to_string(i + 1));
  }
  return modes;
}

/// Simulates one mode from a random initial state under random inputs.
inline DataMatrices simulate_mode(const SystemPair& mode, const Vector& x0, const Matrix& inputs) {
  Matrix x(mode.A.rows(), inputs.cols() + 1);
  x.col(0) = x0;
  for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
    x.col(t + 1) = mode.A * x.col(t) + mode.B * inputs.col(t);
  }
  return DataMatrices(std::move(x), inputs);
}

/**
 * Exact initialization trajectory of length T. Inputs are redrawn until the
 * regressor reaches rank min(T, n + m).
 */
inline DataMatrices gen_init_data(const SystemPair& mode, Eigen::Index T, std::uint64_t seed,
                                  double x0_scale = 1.0, double u_scale = 1.0) {
  if (T < 1) throw std::invalid_argument("gen_init_data: T must be >= 1");
  const Eigen::Index n = mode.A.rows();
  const Eigen::Index m = mode.B.cols();
  std::mt19937_64 rng(seed);
  const Eigen::Index target = std::min(T, n + m);
  for (int attempt = 0; attempt < 50; ++attempt) {
    const Vector x0 = detail::gaussian_matrix(n, 1, rng, x0_scale);
    const Matrix u = detail::gaussian_matrix(m, T, rng, u_scale);
    DataMatrices d = simulate_mode(mode, x0, u);
    if (numeric_rank(normalize_columns(d.regressor()), Tolerance{1e-8, 1e-9}) == target) return d;
  }
  throw ExcitationFailed("gen_init_data: could not reach regressor rank " + std::to_string(target));
}

}  // namespace ddswitch
