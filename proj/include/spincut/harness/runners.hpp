#ifndef SPINCUT_HARNESS_RUNNERS_HPP
#define SPINCUT_HARNESS_RUNNERS_HPP

// One runner per experiment mode. Each returns its files in memory; the
// caller decides where they go. Runners share nothing mutable, so any number
// may execute at once.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spincut/control.hpp"
#include "spincut/dynamics.hpp"
#include "spincut/harness/config.hpp"
#include "spincut/harness/output.hpp"
#include "spincut/optim.hpp"
#include "spincut/parallel.hpp"

namespace spincut::harness {

using ProcessPtr = std::shared_ptr<const SwitchingProcess>;

inline ProcessPtr make_process(const ChainSpec& chain, Direction direction) {
  return std::make_shared<const SwitchingProcess>(chain, direction);
}

inline double pick(const FinalFidelities& f, Target target) {
  return target == Target::cut_fidelity ? f.f_c : f.f_g;
}

inline nlohmann::json to_json(const OptimizationReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const TracePoint& p : r.trace) trace.push_back({{"params", p.params}, {"value", p.value}});
  return {{"initial_params", r.initial_params},
          {"final_params", r.final_params},
          {"initial_value", r.initial_value},
          {"final_value", r.final_value},
          {"iterations", r.iterations},
          {"gradient_inf_norm", r.gradient_inf_norm},
          {"line_search_failures", r.line_search_failures},
          {"status", to_string(r.status)},
          {"trace", trace}};
}

/// BFGS from x0, or from every multistart grid point when one is given.
inline OptimizationReport optimize_schedule(const ProcessPtr& process, ScheduleKind kind, double duration,
                                            const ParamVector& x0, Target target, int n_steps,
                                            const BfgsOptions& options,
                                            const std::optional<MultistartSpec>& multistart = std::nullopt) {
  const Objective objective = fidelity_objective(process, kind, duration, target, n_steps);
  if (multistart) {
    return bfgs_maximize_multistart(objective, grid_starts(multistart->lower, multistart->upper, multistart->per_axis),
                                    options);
  }
  return bfgs_maximize(objective, x0, options);
}

/// g(t) on `points` uniform samples of [0, T].
inline std::vector<double> sample_schedule(const ControlSchedule& s, int points) {
  std::vector<double> g;
  for (int k = 0; k < points; ++k) g.push_back(s.value(s.duration() * k / (points - 1)));
  return g;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double duration = 0.0;
  double baseline = 0.0;
  std::optional<OptimizationReport> optimized;
};

struct SweepRequest {
  ChainSpec chain;
  Direction direction = Direction::cut;
  ScheduleKind kind = ScheduleKind::polynomial_cut;
  ParamVector start;
  std::vector<double> durations;
  Target target = Target::cut_fidelity;
  int n_steps = 300;
  BfgsOptions bfgs;
  bool optimize = true;
  std::optional<MultistartSpec> multistart;
  int workers = 1;
};

/// Baseline (linear ramp) and optimized fidelity per T. Points run in
/// parallel; an optimizer stall is recorded in the row, not raised.
inline std::vector<SweepRow> sweep_rows(const SweepRequest& req) {
  const ProcessPtr process = make_process(req.chain, req.direction);
  const bool outer = req.durations.size() > 1;
  BfgsOptions inner = req.bfgs;
  inner.workers = outer ? 1 : req.workers;
  return parallel_map<SweepRow>(req.durations.size(), outer ? req.workers : 1, [&](std::size_t i) {
    SweepRow row;
    row.duration = req.durations[i];
    row.baseline = pick(process->evaluate(linear_baseline(row.duration, req.direction), req.n_steps), req.target);
    if (req.optimize) {
      row.optimized = optimize_schedule(process, req.kind, row.duration, req.start, req.target, req.n_steps, inner,
                                        req.multistart);
    }
    return row;
  });
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, std::size_t n_params) {
  std::string out = "T,f_baseline,f_opt,iterations,status";
  for (std::size_t k = 1; k <= n_params; ++k) out += ",p" + std::to_string(k);
  out += "\n";
  for (const SweepRow& row : rows) {
    out += num(row.duration) + "," + num(row.baseline);
    if (row.optimized) {
      const OptimizationReport& r = *row.optimized;
      out += "," + num(r.final_value) + "," + std::to_string(r.iterations) + "," + std::string(to_string(r.status));
      for (double p : r.final_params) out += "," + num(p);
    } else {
      out += ",,,";
      for (std::size_t k = 0; k < n_params; ++k) out += ",";
    }
    out += "\n";
  }
  return out;
}

inline std::string sweep_gnuplot(const std::string& csv, const std::string& title, const std::string& ylabel) {
  return "set datafile separator ','\n"
         "set key autotitle columnhead bottom right\n"
         "set title '" + title + "'\n"
         "set xlabel 'T'\nset ylabel '" + ylabel + "'\n"
         "set yrange [0:1.02]\n"
         "plot '" + csv + "' using 1:2 with linespoints pt 7 lc rgb 'blue' title 'linear', \\\n"
         "     '' using 1:3 with linespoints pt 5 lc rgb 'red' title 'optimized'\n";
}

// ---------------------------------------------------------------------------
// Modes

inline RunResult run_evolve(const RunConfig& c) {
  const ProcessPtr process = make_process(c.chain, c.process);
  const PropagationResult run = process->run(c.schedule.build(), c.n_steps, c.sample_stride);
  const FinalFidelities f = process->fidelities(run.state);
  std::ostringstream csv;
  write_trajectory_csv(csv, run.record);

  RunResult out;
  out.files.push_back({"trajectory.csv", csv.str()});
  char line[128];
  std::snprintf(line, sizeof line, "f_C = %.6f\nf_G = %.6f\n", f.f_c, f.f_g);
  out.summary = line;
  out.results = {{"f_c", f.f_c}, {"f_g", f.f_g}};
  return out;
}

inline RunResult run_optimize(const RunConfig& c) {
  const ProcessPtr process = make_process(c.chain, c.process);
  const OptimizationReport report =
      optimize_schedule(process, c.schedule.kind, c.schedule.duration, c.schedule.params, c.optimizer.target,
                        c.n_steps, c.bfgs(), c.optimizer.multistart);
  const ControlSchedule best = c.schedule.build(c.schedule.duration, report.final_params);
  const FinalFidelities f = process->evaluate(best, c.n_steps);

  std::string trace = "iteration,value";
  for (std::size_t k = 1; k <= report.final_params.size(); ++k) trace += ",p" + std::to_string(k);
  trace += "\n";
  for (std::size_t k = 0; k < report.trace.size(); ++k) {
    trace += std::to_string(k) + "," + num(report.trace[k].value) + "," + join_nums(report.trace[k].params) + "\n";
  }
  std::string shape = "t,g\n";
  const auto g = sample_schedule(best, 201);
  for (std::size_t k = 0; k < g.size(); ++k) shape += num(best.duration() * k / 200.0) + "," + num(g[k]) + "\n";

  RunResult out;
  out.files.push_back({"optimization.json", to_json(report).dump(2) + "\n"});
  out.files.push_back({"trace.csv", trace});
  out.files.push_back({"schedule.csv", shape});
  char line[256];
  std::snprintf(line, sizeof line, "status = %s\niterations = %d\nf_C = %.6f\nf_G = %.6f\nparams = %s\n",
                std::string(to_string(report.status)).c_str(), report.iterations, f.f_c, f.f_g,
                join_nums(report.final_params, ' ').c_str());
  out.summary = line;
  out.results = {{"f_c", f.f_c}, {"f_g", f.f_g}, {"final_params", report.final_params},
                 {"status", to_string(report.status)}};
  return out;
}

inline RunResult run_sweep(const RunConfig& c) {
  SweepRequest req{c.chain,   c.process,           c.schedule.kind,    c.schedule.params,       c.sweep,
                   c.optimizer.target, c.n_steps, c.optimizer.bfgs, c.optimizer.enabled, c.optimizer.multistart,
                   c.workers};
  const auto rows = sweep_rows(req);
  RunResult out;
  out.files.push_back({"sweep.csv", sweep_csv(rows, c.schedule.params.size())});
  out.files.push_back({"sweep.gp", sweep_gnuplot("sweep.csv", "fidelity vs T", std::string(to_string(c.optimizer.target)))});
  nlohmann::json rows_json = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    nlohmann::json r = {{"T", row.duration}, {"f_baseline", row.baseline}};
    if (row.optimized) r["f_opt"] = row.optimized->final_value;
    rows_json.push_back(r);
    char line[128];
    if (row.optimized) {
      std::snprintf(line, sizeof line, "T = %-8g baseline = %.6f optimized = %.6f (%s)\n", row.duration, row.baseline,
                    row.optimized->final_value, std::string(to_string(row.optimized->status)).c_str());
    } else {
      std::snprintf(line, sizeof line, "T = %-8g baseline = %.6f\n", row.duration, row.baseline);
    }
    out.summary += line;
  }
  out.results = {{"rows", rows_json}};
  return out;
}

struct LandscapeRun {
  LandscapeGrid grid;
  std::optional<OptimizationReport> optimum;
};

inline LandscapeRun landscape_run(const ProcessPtr& process, ScheduleKind kind, double duration,
                                  const ParamVector& start, const LandscapeConfig& axes, Target target, int n_steps,
                                  const BfgsOptions& bfgs, int workers) {
  LandscapeRun run;
  ParamVector base = start;
  if (axes.mark_optimum) {
    BfgsOptions o = bfgs;
    o.workers = workers;
    run.optimum = optimize_schedule(process, kind, duration, start, target, n_steps, o);
    base = run.optimum->final_params;
  }
  run.grid = scan_landscape(fidelity_objective(process, kind, duration, target, n_steps), base, axes.first,
                            axes.second, workers);
  return run;
}

inline std::string landscape_csv(const LandscapeRun& run) {
  std::ostringstream csv;
  write_landscape_csv(csv, run.grid,
                      run.optimum ? std::optional<ParamVector>(run.optimum->final_params) : std::nullopt);
  return csv.str();
}

/// Heat map with white cross-hair lines at the optimum; the sine form also
/// gets the two slope-sign boundaries.
inline std::string landscape_gnuplot(const std::string& csv, const LandscapeRun& run, ScheduleKind kind) {
  std::string s = "set datafile separator ','\nset view map\nset palette rgb 33,13,10\n"
                  "set xlabel 'p" + std::to_string(run.grid.first.parameter + 1) + "'\n"
                  "set ylabel 'p" + std::to_string(run.grid.second.parameter + 1) + "'\n"
                  "set xrange [" + num(run.grid.first.min) + ":" + num(run.grid.first.max) + "]\n"
                  "set yrange [" + num(run.grid.second.min) + ":" + num(run.grid.second.max) + "]\n";
  if (run.optimum) {
    const double x = run.optimum->final_params[run.grid.first.parameter];
    const double y = run.optimum->final_params[run.grid.second.parameter];
    s += "set arrow from " + num(x) + ",graph 0 to " + num(x) + ",graph 1 nohead lc rgb 'white' front\n";
    s += "set arrow from graph 0," + num(y) + " to graph 1," + num(y) + " nohead lc rgb 'white' front\n";
  }
  std::string extra;
  if (kind == ScheduleKind::sine_cut) {
    const std::string c = num(1.0 / (2.0 * std::numbers::pi));
    extra = ", " + c + " - x/2 with lines lc rgb 'white' dt 2 notitle, " + c + " + x/2 with lines lc rgb 'white' dt 2 notitle";
  }
  s += "splot '" + csv + "' every ::1 using 1:2:3 with pm3d notitle" + extra + "\n";
  return s;
}

inline RunResult run_landscape(const RunConfig& c) {
  const ProcessPtr process = make_process(c.chain, c.process);
  const LandscapeRun run = landscape_run(process, c.schedule.kind, c.schedule.duration, c.schedule.params,
                                         *c.landscape, c.optimizer.target, c.n_steps, c.optimizer.bfgs, c.workers);
  RunResult out;
  out.files.push_back({"landscape.csv", landscape_csv(run)});
  out.files.push_back({"landscape.gp", landscape_gnuplot("landscape.csv", run, c.schedule.kind)});
  const auto [i, j] = run.grid.argmax();
  out.results = {{"grid_max", run.grid.max_value()},
                 {"grid_argmax", {run.grid.first.coordinate(i), run.grid.second.coordinate(j)}}};
  char line[256];
  std::snprintf(line, sizeof line, "grid max = %.6f at (%g, %g)\n", run.grid.max_value(), run.grid.first.coordinate(i),
                run.grid.second.coordinate(j));
  out.summary = line;
  if (run.optimum) {
    const ParamVector& p = run.optimum->final_params;
    const int oi = run.grid.first.nearest_index(p[run.grid.first.parameter]);
    const int oj = run.grid.second.nearest_index(p[run.grid.second.parameter]);
    out.results["optimum"] = p;
    out.results["optimum_value"] = run.optimum->final_value;
    out.results["max_within_one_cell"] = std::abs(i - oi) <= 1 && std::abs(j - oj) <= 1;
    out.summary += "optimum = " + join_nums(p, ' ') + " value = " + num(run.optimum->final_value) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise

struct NoisePoint {
  double strength = 0.0;
  double window = 0.0;
  std::vector<double> samples;

  // Shifted by the first sample: identical samples give that sample back
  // exactly and a standard deviation of exactly 0.
  double mean() const {
    double s = 0.0;
    for (double v : samples) s += v - samples.front();
    return samples.front() + s / static_cast<double>(samples.size());
  }
  /// Population standard deviation.
  double std_dev() const {
    double s = 0.0, s2 = 0.0;
    for (double v : samples) {
      s += v - samples.front();
      s2 += (v - samples.front()) * (v - samples.front());
    }
    const auto n = static_cast<double>(samples.size());
    return std::sqrt(std::max(0.0, s2 / n - (s / n) * (s / n)));
  }
  double std_error() const { return std_dev() / std::sqrt(static_cast<double>(samples.size() - 1)); }
};

/// Realization m of every (dt, dg) point uses seed master + m. Points are
/// ordered window-major.
inline std::vector<NoisePoint> noise_study(const ProcessPtr& process, const ControlSchedule& base,
                                           const NoiseConfig& noise, Target target, int n_steps, int workers) {
  const std::size_t n_dg = noise.strengths.size();
  const auto m = static_cast<std::size_t>(noise.realizations);
  const std::size_t total = noise.windows.size() * n_dg * m;
  const auto values = parallel_map<double>(total, workers, [&](std::size_t k) {
    const std::size_t point = k / m;
    const NoiseSpec spec{noise.windows[point / n_dg], noise.strengths[point % n_dg], noise.seed + k % m};
    return pick(process->evaluate(apply_noise(base, spec), n_steps), target);
  });
  std::vector<NoisePoint> points;
  for (std::size_t p = 0; p * m < total; ++p) {
    points.push_back({noise.strengths[p % n_dg], noise.windows[p / n_dg],
                      std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(p * m),
                                          values.begin() + static_cast<std::ptrdiff_t>((p + 1) * m))});
  }
  return points;
}

inline std::string noise_csv(const std::vector<NoisePoint>& points) {
  std::string out = "dg,dt,mean_fc,std_fc,M\n";
  for (const NoisePoint& p : points) {
    out += num(p.strength) + "," + num(p.window) + "," + num(p.mean()) + "," + num(p.std_dev()) + "," +
           std::to_string(p.samples.size()) + "\n";
  }
  return out;
}

inline nlohmann::json noise_seeds(const NoiseConfig& noise) {
  return {{"master", noise.seed},
          {"realizations", noise.realizations},
          {"rule", "realization m uses master + m"},
          {"dt", noise.windows},
          {"dg", noise.strengths}};
}

inline std::string noise_gnuplot(const std::string& csv, const std::vector<double>& windows) {
  std::string s = "set datafile separator ','\nset xlabel 'dg'\nset ylabel 'mean f_C'\nset key bottom left\n"
                  "set offsets graph 0.05, graph 0.05, 0, 0\nplot ";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (w) s += ", \\\n     ";
    s += "'" + csv + "' using 1:($2 == " + num(windows[w]) + " ? $3 : NaN):4 with yerrorlines title 'dt = " +
         num(windows[w]) + "'";
  }
  return s + "\n";
}

inline RunResult run_noise(const RunConfig& c) {
  const ProcessPtr process = make_process(c.chain, c.process);
  const NoiseConfig& noise = *c.noise;
  ParamVector params = c.schedule.params;
  std::optional<OptimizationReport> report;
  if (noise.optimize_first) {
    report = optimize_schedule(process, c.schedule.kind, c.schedule.duration, params, c.optimizer.target, c.n_steps,
                               c.bfgs(), c.optimizer.multistart);
    params = report->final_params;
  }
  const ControlSchedule base = c.schedule.build(c.schedule.duration, params);
  const double noiseless = pick(process->evaluate(base, c.n_steps), c.optimizer.target);
  const auto points = noise_study(process, base, noise, c.optimizer.target, c.n_steps, c.workers);

  std::string realizations = "dg,dt,seed,value\n";
  for (const NoisePoint& p : points) {
    for (std::size_t m = 0; m < p.samples.size(); ++m) {
      realizations += num(p.strength) + "," + num(p.window) + "," + std::to_string(noise.seed + m) + "," +
                      num(p.samples[m]) + "\n";
    }
  }
  RunResult out;
  out.files.push_back({"noise.csv", noise_csv(points)});
  out.files.push_back({"noise_realizations.csv", realizations});
  out.files.push_back({"noise.gp", noise_gnuplot("noise.csv", noise.windows)});
  out.seeds = noise_seeds(noise);
  out.results = {{"noiseless", noiseless}, {"base_params", params}};
  out.summary = "noiseless = " + num(noiseless) + "\n";
  for (const NoisePoint& p : points) {
    char line[128];
    std::snprintf(line, sizeof line, "dt = %-10g dg = %-6g mean = %.6f std = %.6f\n", p.window, p.strength, p.mean(),
                  p.std_dev());
    out.summary += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-spin block

inline RunResult run_two_spin(const RunConfig& c) {
  const ProcessPtr process = make_process(c.chain, c.process);
  const FinalFidelities linear = process->evaluate(linear_baseline(c.schedule.duration, c.process), c.n_steps);
  const ControlSchedule schedule = c.schedule.build();
  const FinalFidelities controlled = process->evaluate(schedule, c.n_steps);

  std::string csv = "schedule,T,params,f_c,f_g\n";
  csv += "linear," + num(c.schedule.duration) + ",," + num(linear.f_c) + "," + num(linear.f_g) + "\n";
  csv += std::string(to_string(c.schedule.kind)) + "," + num(c.schedule.duration) + "," +
         join_nums(c.schedule.params, ' ') + "," + num(controlled.f_c) + "," + num(controlled.f_g) + "\n";

  RunResult out;
  out.files.push_back({"two_spin.csv", csv});
  std::vector<int> block = process->block();
  out.results = {{"block", block}, {"linear_f_c", linear.f_c}, {"controlled_f_c", controlled.f_c}};
  char line[160];
  std::snprintf(line, sizeof line, "block size = %zu\nlinear f_C = %.6f\ncontrolled f_C = %.6f\n", block.size(),
                linear.f_c, controlled.f_c);
  out.summary = line;
  return out;
}

inline RunResult run(const RunConfig& c) {
  check_mode_requirements(c);
  switch (c.mode) {
    case Mode::evolve: return run_evolve(c);
    case Mode::optimize: return run_optimize(c);
    case Mode::sweep: return run_sweep(c);
    case Mode::landscape: return run_landscape(c);
    case Mode::noise: return run_noise(c);
    case Mode::two_spin: return run_two_spin(c);
  }
  throw ConfigError("mode", "unhandled");
}

}  // namespace spincut::harness

#endif  // SPINCUT_HARNESS_RUNNERS_HPP
