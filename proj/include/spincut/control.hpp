#ifndef SPINCUT_CONTROL_HPP
#define SPINCUT_CONTROL_HPP

// Control schedules g(t) for the switched coupling and apparatus noise on top of them.

#include <algorithm>
#include <iterator>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spincut/errors.hpp"

namespace spincut {

/// cut drives g from 1 to 0, stitch from 0 to 1.
enum class Direction { cut, stitch };

enum class ScheduleKind { polynomial_cut, sine_cut, pulse, polynomial_stitch };

inline std::string_view to_string(Direction d) { return d == Direction::cut ? "cut" : "stitch"; }

inline std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::polynomial_cut: return "polynomial_cut";
    case ScheduleKind::sine_cut: return "sine_cut";
    case ScheduleKind::pulse: return "pulse";
    case ScheduleKind::polynomial_stitch: return "polynomial_stitch";
  }
  return "unknown";
}

inline ScheduleKind parse_schedule_kind(std::string_view name) {
  for (auto kind : {ScheduleKind::polynomial_cut, ScheduleKind::sine_cut, ScheduleKind::pulse,
                    ScheduleKind::polynomial_stitch}) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown schedule kind '" + std::string(name) + "'");
}

inline Direction parse_direction(std::string_view name) {
  if (name == "cut") return Direction::cut;
  if (name == "stitch") return Direction::stitch;
  throw ArgumentError("unknown direction '" + std::string(name) + "'");
}

/// Anything `propagate` can drive: g(t), duration, and the step boundaries it
/// wants for a requested resolution.
template <class S>
concept Schedule = requires(const S& s, double t, int n) {
  { s.value(t) } -> std::convertible_to<double>;
  { s.duration() } -> std::convertible_to<double>;
  { s.direction() } -> std::same_as<Direction>;
  { s.piecewise_constant() } -> std::convertible_to<bool>;
  { s.step_grid(n) } -> std::convertible_to<std::vector<double>>;
};

/// A parametrized g(t) on [0, T].
///
/// Free parameters per kind:
///  - polynomial_cut:    a2..aK of g = 1 + sum a_n (t/T)^n, a1 = -(1 + a2 + ... + aK)
///  - sine_cut:          b1..bK of g = 1 - t/T + sum b_n sin(n pi t/T)
///  - pulse:             c1..cK, amplitude c_n on [(n-1)T/K, nT/K)
///  - polynomial_stitch: d2..dK of g = 1 + sum d_n ((T-t)/T)^n, d1 = -(1 + d2 + ... + dK)
///
/// Outside [0, T] g takes the process boundary values (1 then 0 for a cut,
/// 0 then 1 for a stitch).
class ControlSchedule {
 public:
  ControlSchedule(ScheduleKind kind, double duration, std::vector<double> params, Direction direction)
      : kind_(kind), duration_(duration), params_(std::move(params)), direction_(direction) {
    if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
      throw ArgumentError("schedule duration must be positive and finite");
    }
    for (double p : params_) {
      if (!std::isfinite(p)) throw ArgumentError("schedule parameters must be finite");
    }
    const bool cut_kind = kind_ == ScheduleKind::polynomial_cut || kind_ == ScheduleKind::sine_cut;
    if (cut_kind && direction_ != Direction::cut) {
      throw ArgumentError(std::string(to_string(kind_)) + " is a cut schedule");
    }
    if (kind_ == ScheduleKind::polynomial_stitch && direction_ != Direction::stitch) {
      throw ArgumentError("polynomial_stitch is a stitch schedule");
    }
    if (kind_ == ScheduleKind::pulse && params_.empty()) throw ArgumentError("a pulse train needs >= 1 amplitude");
  }

  static ControlSchedule polynomial_cut(double duration, std::vector<double> free_params = {}) {
    return {ScheduleKind::polynomial_cut, duration, std::move(free_params), Direction::cut};
  }
  static ControlSchedule sine_cut(double duration, std::vector<double> free_params = {}) {
    return {ScheduleKind::sine_cut, duration, std::move(free_params), Direction::cut};
  }
  static ControlSchedule pulse(double duration, std::vector<double> amplitudes, Direction direction = Direction::cut) {
    return {ScheduleKind::pulse, duration, std::move(amplitudes), direction};
  }
  static ControlSchedule polynomial_stitch(double duration, std::vector<double> free_params = {}) {
    return {ScheduleKind::polynomial_stitch, duration, std::move(free_params), Direction::stitch};
  }

  ScheduleKind kind() const { return kind_; }
  double duration() const { return duration_; }
  Direction direction() const { return direction_; }
  const std::vector<double>& params() const { return params_; }
  bool piecewise_constant() const { return kind_ == ScheduleKind::pulse; }

  double start_value() const { return direction_ == Direction::cut ? 1.0 : 0.0; }
  double end_value() const { return direction_ == Direction::cut ? 0.0 : 1.0; }

  /// Full polynomial coefficient list a1..aK (or d1..dK) with the derived first entry.
  std::vector<double> polynomial_coefficients() const {
    double sum = 1.0;
    for (double p : params_) sum += p;
    std::vector<double> coefficients{-sum};
    coefficients.insert(coefficients.end(), params_.begin(), params_.end());
    return coefficients;
  }

  double value(double t) const {
    if (kind_ == ScheduleKind::pulse) {
      if (t < 0.0 || t >= duration_) return t < 0.0 ? start_value() : end_value();
      return params_[pulse_index(t)];
    }
    if (t <= 0.0) return start_value();
    if (t >= duration_) return end_value();
    const double x = t / duration_;
    switch (kind_) {
      case ScheduleKind::polynomial_cut: return 1.0 + x * horner(x);
      case ScheduleKind::polynomial_stitch: return 1.0 + (1.0 - x) * horner(1.0 - x);
      case ScheduleKind::sine_cut: {
        double g = 1.0 - x;
        for (std::size_t n = 0; n < params_.size(); ++n) {
          g += params_[n] * std::sin(static_cast<double>(n + 1) * std::numbers::pi * x);
        }
        return g;
      }
      case ScheduleKind::pulse: break;
    }
    return 0.0;
  }

  /// dg/dt. At t = 0 and t = T this is the one-sided derivative from inside
  /// [0, T]; outside it is zero, as it is inside a pulse window.
  double derivative(double t) const {
    if (t < 0.0 || t > duration_ || kind_ == ScheduleKind::pulse) return 0.0;
    const double x = t / duration_;
    switch (kind_) {
      case ScheduleKind::polynomial_cut: return horner_derivative(x) / duration_;
      case ScheduleKind::polynomial_stitch: return -horner_derivative(1.0 - x) / duration_;
      case ScheduleKind::sine_cut: {
        double slope = -1.0;
        for (std::size_t n = 0; n < params_.size(); ++n) {
          const double w = static_cast<double>(n + 1) * std::numbers::pi;
          slope += params_[n] * w * std::cos(w * x);
        }
        return slope / duration_;
      }
      case ScheduleKind::pulse: break;
    }
    return 0.0;
  }

  /// Step boundaries t_0 = 0 < ... < t_m = T. Smooth schedules use n_steps
  /// uniform steps; pulse trains use their own K windows.
  std::vector<double> step_grid(int n_steps) const {
    const int m = kind_ == ScheduleKind::pulse ? static_cast<int>(params_.size()) : n_steps;
    if (m < 1) throw ArgumentError("n_steps must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k <= m; ++k) grid[static_cast<std::size_t>(k)] = duration_ * k / m;
    return grid;
  }

  friend bool operator==(const ControlSchedule&, const ControlSchedule&) = default;

 private:
  std::size_t pulse_index(double t) const {
    const auto k = static_cast<std::size_t>(std::floor(t * static_cast<double>(params_.size()) / duration_));
    return std::min(k, params_.size() - 1);
  }

  // a1 + a2 x + ... + aK x^(K-1)
  double horner(double x) const {
    const auto c = polynomial_coefficients();
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  double horner_derivative(double x) const {
    const auto c = polynomial_coefficients();
    double acc = 0.0;
    for (std::size_t n = c.size(); n-- > 0;) acc = acc * x + static_cast<double>(n + 1) * c[n];
    return acc;
  }

  ScheduleKind kind_;
  double duration_;
  std::vector<double> params_;
  Direction direction_;
};

/// g(t) = 1 - t/T for a cut, t/T for a stitch.
inline ControlSchedule linear_baseline(double duration, Direction direction) {
  return direction == Direction::cut ? ControlSchedule::polynomial_cut(duration)
                                     : ControlSchedule::polynomial_stitch(duration);
}

/// Piecewise-constant apparatus noise: window length, strength and seed.
struct NoiseSpec {
  double window = 0.01;
  double strength = 0.0;
  std::uint64_t seed = 0;
};

/// Uniform draw in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_draw(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// g(t) + strength * (1/2 - r_k) on the k-th window [k dt, (k+1) dt) inside [0, T].
template <Schedule Base = ControlSchedule>
class NoisySchedule {
 public:
  NoisySchedule(Base base, const NoiseSpec& noise) : base_(std::move(base)), noise_(noise) {
    if (!(noise.window > 0.0) || !std::isfinite(noise.window)) throw ArgumentError("noise window must be > 0");
    if (!std::isfinite(noise.strength)) throw ArgumentError("noise strength must be finite");
    const double windows = base_.duration() / noise.window;
    const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil(windows - 1e-9)));
    offsets_.reserve(count);
    std::mt19937_64 engine(noise.seed);
    for (std::size_t k = 0; k < count; ++k) offsets_.push_back(noise.strength * (0.5 - unit_draw(engine)));
  }

  double value(double t) const {
    const double g = base_.value(t);
    if (t < 0.0 || t >= base_.duration()) return g;
    return g + offsets_[window_index(t)];
  }

  double duration() const { return base_.duration(); }
  Direction direction() const { return base_.direction(); }
  bool piecewise_constant() const { return base_.piecewise_constant(); }
  const Base& base() const { return base_; }
  const NoiseSpec& noise() const { return noise_; }
  const std::vector<double>& offsets() const { return offsets_; }

  /// Common refinement of the base grid and the noise windows. A window
  /// boundary within 1e-12 T of a base grid point is dropped, so aligned
  /// windows leave the base grid untouched.
  std::vector<double> step_grid(int n_steps) const {
    const std::vector<double> base = base_.step_grid(n_steps);
    const double eps = 1e-12 * base_.duration();
    std::vector<double> grid = base;
    for (std::size_t k = 1; k < offsets_.size(); ++k) {
      const double t = noise_.window * static_cast<double>(k);
      const auto it = std::lower_bound(base.begin(), base.end(), t);
      const bool near_next = it != base.end() && *it - t <= eps;
      const bool near_prev = it != base.begin() && t - *std::prev(it) <= eps;
      if (!near_next && !near_prev) grid.push_back(t);
    }
    std::sort(grid.begin(), grid.end());
    return grid;
  }

 private:
  std::size_t window_index(double t) const {
    const auto k = static_cast<std::size_t>(std::floor(t / noise_.window));
    return std::min(k, offsets_.size() - 1);
  }

  Base base_;
  NoiseSpec noise_;
  std::vector<double> offsets_;
};

template <Schedule Base>
NoisySchedule<Base> apply_noise(Base schedule, const NoiseSpec& noise) {
  return NoisySchedule<Base>(std::move(schedule), noise);
}

}  // namespace spincut

#endif  // SPINCUT_CONTROL_HPP
