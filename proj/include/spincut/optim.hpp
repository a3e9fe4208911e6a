#ifndef SPINCUT_OPTIM_HPP
#define SPINCUT_OPTIM_HPP

// Quasi-Newton maximization of final fidelities over schedule parameters,
// plus brute-force 2-D landscape scans.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

#include "spincut/control.hpp"
#include "spincut/dynamics.hpp"
#include "spincut/errors.hpp"
#include "spincut/parallel.hpp"
#include "spincut/spin_core.hpp"

namespace spincut {

using ParamVector = std::vector<double>;
using Objective = std::function<double(const ParamVector&)>;

inline constexpr double kGradientStep = 0.1;

/// Central differences [f(x + h e_i) - f(x - h e_i)] / 2h. The 2 dim
/// evaluations may run on `workers` threads; the result does not depend on it.
inline ParamVector finite_difference_gradient(const Objective& objective, const ParamVector& x,
                                              double h = kGradientStep, int workers = 1) {
  if (!(h > 0.0)) throw ArgumentError("finite_difference_gradient: step must be > 0");
  const std::size_t n = x.size();
  const auto values = parallel_map<double>(2 * n, workers, [&](std::size_t k) {
    ParamVector shifted = x;
    shifted[k / 2] += (k % 2 == 0 ? h : -h);
    return objective(shifted);
  });
  ParamVector gradient(n);
  for (std::size_t i = 0; i < n; ++i) gradient[i] = (values[2 * i] - values[2 * i + 1]) / (2.0 * h);
  return gradient;
}

struct BfgsOptions {
  double gradient_step = kGradientStep;
  double tolerance = 1e-4;  // on the gradient infinity norm
  int max_iterations = 200;
  double armijo = 1e-4;
  int max_halvings = 30;
  int workers = 1;
};

enum class BfgsStatus { converged, max_iterations, stalled };

inline std::string_view to_string(BfgsStatus status) {
  switch (status) {
    case BfgsStatus::converged: return "converged";
    case BfgsStatus::max_iterations: return "max_iterations";
    case BfgsStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct TracePoint {
  ParamVector params;
  double value = 0.0;
};

struct OptimizationReport {
  ParamVector initial_params;
  ParamVector final_params;
  double initial_value = 0.0;
  double final_value = 0.0;
  int iterations = 0;
  double gradient_inf_norm = 0.0;
  int line_search_failures = 0;
  BfgsStatus status = BfgsStatus::max_iterations;
  std::vector<TracePoint> trace;
  Eigen::MatrixXd inverse_hessian;  // final estimate, for the minimization of -objective
};

namespace detail {

inline Eigen::VectorXd to_eigen(const ParamVector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ParamVector to_params(const Eigen::VectorXd& v) { return ParamVector(v.data(), v.data() + v.size()); }

}  // namespace detail

/// BFGS on -objective with a backtracking (halving) Armijo line search.
///
/// The inverse Hessian starts as I / |g0|_inf clamped to [1e-3, 1e3]; the
/// update is skipped when s.y <= 1e-10. A line search that exhausts its
/// halvings ends the run with status `stalled`, keeping the best point.
inline OptimizationReport bfgs_maximize(const Objective& objective, const ParamVector& x0,
                                        const BfgsOptions& options = {}) {
  for (double v : x0) {
    if (!std::isfinite(v)) throw ArgumentError("bfgs_maximize: initial point must be finite");
  }
  const auto n = static_cast<Eigen::Index>(x0.size());
  auto loss = [&](const Eigen::VectorXd& x) { return -objective(detail::to_params(x)); };
  auto loss_gradient = [&](const Eigen::VectorXd& x) {
    const ParamVector g = finite_difference_gradient(objective, detail::to_params(x), options.gradient_step,
                                                     options.workers);
    return Eigen::VectorXd(-detail::to_eigen(g));
  };

  OptimizationReport report;
  report.initial_params = x0;
  Eigen::VectorXd x = detail::to_eigen(x0);
  double fx = loss(x);
  report.initial_value = -fx;
  report.trace.push_back({x0, -fx});

  Eigen::VectorXd g = n > 0 ? loss_gradient(x) : Eigen::VectorXd();
  const double g0_norm = n > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  const double scale = g0_norm > 0.0 ? std::clamp(1.0 / g0_norm, 1e-3, 1e3) : 1.0;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd h_inv = scale * identity;

  auto inf_norm = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  report.status = BfgsStatus::max_iterations;
  while (true) {
    if (inf_norm(g) < options.tolerance) {
      report.status = BfgsStatus::converged;
      break;
    }
    if (report.iterations >= options.max_iterations) break;

    Eigen::VectorXd direction = -h_inv * g;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      h_inv = scale * identity;
      direction = -h_inv * g;
      slope = g.dot(direction);
    }

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_next;
    double f_next = 0.0;
    for (int trial = 0; trial <= options.max_halvings; ++trial, alpha *= 0.5) {
      x_next = x + alpha * direction;
      f_next = loss(x_next);
      if (f_next <= fx + options.armijo * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      ++report.line_search_failures;
      report.status = BfgsStatus::stalled;
      break;
    }

    const Eigen::VectorXd g_next = loss_gradient(x_next);
    const Eigen::VectorXd s = x_next - x;
    const Eigen::VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-10) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = identity - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
      h_inv = 0.5 * (h_inv + h_inv.transpose()).eval();
    }
    x = x_next;
    fx = f_next;
    g = g_next;
    ++report.iterations;
    report.trace.push_back({detail::to_params(x), -fx});
  }

  report.final_params = detail::to_params(x);
  report.final_value = -fx;
  report.gradient_inf_norm = inf_norm(g);
  report.inverse_hessian = h_inv;
  return report;
}

/// Runs bfgs_maximize from every start and keeps the best final value
/// (earliest start on ties).
inline OptimizationReport bfgs_maximize_multistart(const Objective& objective, const std::vector<ParamVector>& starts,
                                                   const BfgsOptions& options = {}) {
  if (starts.empty()) throw ArgumentError("bfgs_maximize_multistart: no starting points");
  std::optional<OptimizationReport> best;
  for (const ParamVector& x0 : starts) {
    OptimizationReport report = bfgs_maximize(objective, x0, options);
    if (!best || report.final_value > best->final_value) best = std::move(report);
  }
  return *best;
}

/// Uniform grid of starts: `per_axis` points on [lower_i, upper_i] per coordinate.
inline std::vector<ParamVector> grid_starts(const ParamVector& lower, const ParamVector& upper, int per_axis) {
  if (lower.size() != upper.size() || per_axis < 1) throw ArgumentError("grid_starts: bad bounds");
  std::vector<ParamVector> starts{ParamVector{}};
  for (std::size_t i = 0; i < lower.size(); ++i) {
    std::vector<ParamVector> next;
    for (const ParamVector& prefix : starts) {
      for (int k = 0; k < per_axis; ++k) {
        ParamVector p = prefix;
        p.push_back(per_axis == 1 ? 0.5 * (lower[i] + upper[i])
                                  : lower[i] + (upper[i] - lower[i]) * k / (per_axis - 1));
        next.push_back(std::move(p));
      }
    }
    starts = std::move(next);
  }
  return starts;
}

// ---------------------------------------------------------------------------
// Landscapes

struct LandscapeAxis {
  std::size_t parameter = 0;
  double min = 0.0;
  double max = 1.0;
  int resolution = 2;

  double coordinate(int i) const { return min + (max - min) * i / (resolution - 1); }

  int nearest_index(double value) const {
    const double step = (max - min) / (resolution - 1);
    const auto i = static_cast<int>(std::lround((value - min) / step));
    return std::clamp(i, 0, resolution - 1);
  }
};

/// Row-major fidelity grid: values[i * second.resolution + j] is the objective at
/// (first.coordinate(i), second.coordinate(j)).
struct LandscapeGrid {
  LandscapeAxis first;
  LandscapeAxis second;
  ParamVector base_point;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i * second.resolution + j)]; }

  std::pair<int, int> argmax() const {
    const auto it = std::max_element(values.begin(), values.end());
    const auto k = static_cast<int>(it - values.begin());
    return {k / second.resolution, k % second.resolution};
  }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }
};

inline LandscapeGrid scan_landscape(const Objective& objective, const ParamVector& base_point,
                                    const LandscapeAxis& first, const LandscapeAxis& second, int workers = 1) {
  for (const LandscapeAxis* axis : {&first, &second}) {
    if (axis->resolution < 2) throw ArgumentError("scan_landscape: resolution must be >= 2");
    if (axis->parameter >= base_point.size()) throw ArgumentError("scan_landscape: axis parameter out of range");
    if (!(axis->max > axis->min)) throw ArgumentError("scan_landscape: axis max must exceed min");
  }
  if (first.parameter == second.parameter) throw ArgumentError("scan_landscape: axes must differ");

  LandscapeGrid grid{first, second, base_point, {}};
  const auto cells = static_cast<std::size_t>(first.resolution) * static_cast<std::size_t>(second.resolution);
  grid.values = parallel_map<double>(cells, workers, [&](std::size_t k) {
    ParamVector p = base_point;
    p[first.parameter] = first.coordinate(static_cast<int>(k) / second.resolution);
    p[second.parameter] = second.coordinate(static_cast<int>(k) % second.resolution);
    return objective(p);
  });
  return grid;
}

/// `# first: ...` / `# second: ...` metadata lines (plus an optional
/// `# optimum:` marker), then `p1,p2,fidelity` rows.
inline void write_landscape_csv(std::ostream& out, const LandscapeGrid& grid,
                                const std::optional<ParamVector>& optimum = std::nullopt) {
  char line[256];
  for (const auto& [label, axis] : {std::pair{"first", &grid.first}, std::pair{"second", &grid.second}}) {
    std::snprintf(line, sizeof line, "# %s: parameter=%zu min=%.17g max=%.17g resolution=%d\n", label,
                  axis->parameter, axis->min, axis->max, axis->resolution);
    out << line;
  }
  if (optimum) {
    std::snprintf(line, sizeof line, "# optimum: p1=%.17g p2=%.17g\n", (*optimum)[grid.first.parameter],
                  (*optimum)[grid.second.parameter]);
    out << line;
  }
  out << "p1,p2,fidelity\n";
  for (int i = 0; i < grid.first.resolution; ++i) {
    for (int j = 0; j < grid.second.resolution; ++j) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", grid.first.coordinate(i), grid.second.coordinate(j),
                    grid.at(i, j));
      out << line;
    }
  }
}

// ---------------------------------------------------------------------------
// Fidelity objectives

enum class Target { cut_fidelity, ground_fidelity };

inline std::string_view to_string(Target target) {
  return target == Target::cut_fidelity ? "cut_fidelity" : "ground_fidelity";
}

struct ObjectiveSpec {
  ChainSpec chain;
  ScheduleKind kind = ScheduleKind::polynomial_cut;
  Direction direction = Direction::cut;
  double duration = 1.0;
  Target target = Target::cut_fidelity;
  int n_steps = 300;
};

/// Maps free schedule parameters to the final f_C or f_G of `process`.
inline Objective fidelity_objective(std::shared_ptr<const SwitchingProcess> process, ScheduleKind kind,
                                    double duration, Target target, int n_steps) {
  return [process = std::move(process), kind, duration, target, n_steps](const ParamVector& params) {
    const ControlSchedule schedule(kind, duration, params, process->direction());
    const FinalFidelities f = process->evaluate(schedule, n_steps);
    return target == Target::cut_fidelity ? f.f_c : f.f_g;
  };
}

inline Objective fidelity_objective(const ObjectiveSpec& spec) {
  return fidelity_objective(std::make_shared<const SwitchingProcess>(spec.chain, spec.direction), spec.kind,
                            spec.duration, spec.target, spec.n_steps);
}

}  // namespace spincut

#endif  // SPINCUT_OPTIM_HPP
