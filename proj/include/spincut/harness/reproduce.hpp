#ifndef SPINCUT_HARNESS_REPRODUCE_HPP
#define SPINCUT_HARNESS_REPRODUCE_HPP

// Fixed pipelines that regenerate the published table and figures as CSV plus
// gnuplot scripts. `quick` shrinks every grid and iteration budget so the
// whole set runs in seconds (used by the test suite); the file layout is the
// same either way.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spincut/harness/output.hpp"
#include "spincut/harness/runners.hpp"

namespace spincut::harness {

struct ReproduceOptions {
  int n_steps = 300;
  int workers = 1;
  bool quick = false;
  std::uint64_t seed = 1;
};

inline constexpr std::array<std::string_view, 7> kReproduceTargets = {"table1", "fig3", "fig6", "fig7",
                                                                      "fig8",   "fig9", "stitch"};

inline nlohmann::json to_json(std::string_view target, const ReproduceOptions& o) {
  return {{"reproduce", target}, {"n_steps", o.n_steps}, {"workers", o.workers}, {"quick", o.quick}, {"seed", o.seed}};
}

namespace detail {

inline ChainSpec ring(int n, double field) { return ChainSpec::single_spin_cut(n, Topology::ring, 1.0, field); }
inline ChainSpec open_chain(int n, double field) { return ChainSpec::single_spin_cut(n, Topology::open, 1.0, field); }

inline BfgsOptions bfgs_for(const ReproduceOptions& o) {
  BfgsOptions b;
  if (o.quick) b.max_iterations = 1;
  return b;
}

inline std::vector<double> sweep_times(const ReproduceOptions& o) {
  if (o.quick) return {0.3, 0.6};
  return {0.3, 0.6, 0.9, 1.5, 2.0};
}

inline SweepRequest sweep_request(const ChainSpec& chain, Direction direction, ScheduleKind kind,
                                  std::vector<double> durations, const ReproduceOptions& o) {
  SweepRequest req;
  req.chain = chain;
  req.direction = direction;
  req.kind = kind;
  req.start = {0.0, 0.0};
  req.durations = std::move(durations);
  req.target = direction == Direction::cut ? Target::cut_fidelity : Target::ground_fidelity;
  req.n_steps = o.n_steps;
  req.bfgs = bfgs_for(o);
  req.workers = o.workers;
  return req;
}

// Panels of fidelity-vs-T curves, one CSV each, drawn side by side.
inline RunResult sweep_panels(std::string_view stem, const std::vector<std::pair<std::string, SweepRequest>>& panels,
                              const std::string& ylabel) {
  RunResult out;
  std::string gp = "set datafile separator ','\nset multiplot layout 1," + std::to_string(panels.size()) + "\n";
  nlohmann::json results = nlohmann::json::object();
  for (const auto& [label, req] : panels) {
    const std::string csv = std::string(stem) + "_" + label + ".csv";
    const auto rows = sweep_rows(req);
    out.files.push_back({csv, sweep_csv(rows, req.start.size())});
    gp += "set title '" + label + "'\nset xlabel 'T'\nset ylabel '" + ylabel + "'\nset yrange [0:1.02]\n"
          "set key bottom right\n"
          "plot '" + csv + "' using 1:2 with linespoints pt 7 lc rgb 'blue' title 'linear', \\\n"
          "     '' using 1:3 with linespoints pt 5 lc rgb 'red' title 'optimized'\n";
    nlohmann::json r = nlohmann::json::array();
    for (const SweepRow& row : rows) {
      r.push_back({{"T", row.duration}, {"f_baseline", row.baseline}, {"f_opt", row.optimized->final_value}});
      char line[160];
      std::snprintf(line, sizeof line, "%-8s T = %-5g linear = %.4f optimized = %.4f\n", label.c_str(), row.duration,
                    row.baseline, row.optimized->final_value);
      out.summary += line;
    }
    results[label] = r;
  }
  out.files.push_back({std::string(stem) + ".gp", gp + "unset multiplot\n"});
  out.results = results;
  return out;
}

inline RunResult table1(const ReproduceOptions& o) {
  const std::vector<double> times = o.quick ? std::vector<double>{0.3, 0.6} : std::vector<double>{0.3, 0.6, 0.9, 2.0};
  const std::vector<ParamVector> published = {{122.8, -82.0}, {54.3, -36.3}, {20.0, -13.5}, {0.87, -0.72}};
  const ChainSpec chain = ring(6, 2.0);
  const auto rows = sweep_rows(sweep_request(chain, Direction::cut, ScheduleKind::polynomial_cut, times, o));
  const ProcessPtr process = make_process(chain, Direction::cut);
  const auto at_published = parallel_map<double>(times.size(), o.workers, [&](std::size_t i) {
    return process->evaluate(ControlSchedule::polynomial_cut(times[i], published[i]), o.n_steps).f_c;
  });

  RunResult out;
  std::string csv = "T,f_c0,f_c_published,a2_published,a3_published,f_c_opt,a2_opt,a3_opt,iterations,status\n";
  std::string shapes = "s";
  for (double T : times) shapes += ",g_T" + num(T);
  shapes += "\n";
  std::vector<std::vector<double>> g;
  nlohmann::json results = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const OptimizationReport& r = *rows[i].optimized;
    csv += num(times[i]) + "," + num(rows[i].baseline) + "," + num(at_published[i]) + "," + join_nums(published[i]) +
           "," + num(r.final_value) + "," + join_nums(r.final_params) + "," + std::to_string(r.iterations) + "," +
           std::string(to_string(r.status)) + "\n";
    g.push_back(sample_schedule(ControlSchedule::polynomial_cut(times[i], r.final_params), 101));
    results.push_back({{"T", times[i]},
                       {"f_c0", rows[i].baseline},
                       {"f_c_published", at_published[i]},
                       {"f_c_opt", r.final_value},
                       {"params_opt", r.final_params}});
    char line[200];
    std::snprintf(line, sizeof line, "T = %-4g f_C0 = %.3f f_C(published) = %.3f f_C(bfgs) = %.3f at (%.2f, %.2f)\n",
                  times[i], rows[i].baseline, at_published[i], r.final_value, r.final_params[0], r.final_params[1]);
    out.summary += line;
  }
  for (int k = 0; k <= 100; ++k) {
    shapes += num(k / 100.0);
    for (const auto& column : g) shapes += "," + num(column[static_cast<std::size_t>(k)]);
    shapes += "\n";
  }
  std::string gp = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't/T'\nset ylabel 'g(t)'\n"
                   "plot for [c=2:" + std::to_string(times.size() + 1) + "] 'table1_shapes.csv' using 1:c with lines\n";
  out.files.push_back({"table1.csv", csv});
  out.files.push_back({"table1_shapes.csv", shapes});
  out.files.push_back({"table1.gp", gp});
  out.results = {{"rows", results}};
  return out;
}

inline RunResult fig3(const ReproduceOptions& o) {
  std::vector<std::pair<std::string, SweepRequest>> panels;
  for (const auto& [label, chain] : {std::pair{"ring6", ring(6, 2.0)}, std::pair{"ring7", ring(7, 2.0)},
                                     std::pair{"open6", open_chain(6, 2.0)}, std::pair{"open7", open_chain(7, 2.0)}}) {
    panels.emplace_back(label, sweep_request(chain, Direction::cut, ScheduleKind::polynomial_cut, sweep_times(o), o));
  }
  return sweep_panels("fig3", panels, "f_C");
}

inline RunResult fig9(const ReproduceOptions& o) {
  std::vector<std::pair<std::string, SweepRequest>> panels;
  for (const auto& [label, chain] : {std::pair{"ring6", ring(6, 2.0)}, std::pair{"ring7", ring(7, 2.0)}}) {
    panels.emplace_back(label, sweep_request(chain, Direction::cut, ScheduleKind::sine_cut, sweep_times(o), o));
  }
  return sweep_panels("fig9", panels, "f_C");
}

inline RunResult stitch(const ReproduceOptions& o) {
  std::vector<std::pair<std::string, SweepRequest>> panels;
  for (const auto& [label, chain] : {std::pair{"ring6", ring(6, 2.0)}, std::pair{"ring7", ring(7, 2.2)}}) {
    panels.emplace_back(label,
                        sweep_request(chain, Direction::stitch, ScheduleKind::polynomial_stitch, sweep_times(o), o));
  }
  return sweep_panels("stitch", panels, "f_G");
}

// Linear and optimized trajectories of the N = 6 ring at T = 0.6.
inline RunResult fig6(const ReproduceOptions& o) {
  const ProcessPtr process = make_process(ring(6, 2.0), Direction::cut);
  const std::array<ControlSchedule, 2> schedules = {ControlSchedule::polynomial_cut(0.6),
                                                    ControlSchedule::polynomial_cut(0.6, {54.3, -36.3})};
  const auto runs = parallel_map<PropagationResult>(2, o.workers, [&](std::size_t i) {
    return process->run(schedules[i], o.n_steps, 1);
  });
  RunResult out;
  const std::array<std::string, 2> names = {"linear", "optimized"};
  for (std::size_t i = 0; i < 2; ++i) {
    std::ostringstream csv;
    write_trajectory_csv(csv, runs[i].record);
    out.files.push_back({"fig6_" + names[i] + ".csv", csv.str()});
    const auto& fg = runs[i].record.f_g;
    const double min_fg = *std::min_element(fg.begin(), fg.end());
    const FinalFidelities f = process->fidelities(runs[i].state);
    out.results[names[i]] = {{"f_c", f.f_c}, {"f_g", f.f_g}, {"min_f_g", min_fg}};
    char line[160];
    std::snprintf(line, sizeof line, "%-9s final f_C = %.4f final f_G = %.4f min f_g(t) = %.4f\n", names[i].c_str(),
                  f.f_c, f.f_g, min_fg);
    out.summary += line;
  }
  out.files.push_back(
      {"fig6.gp",
       "set datafile separator ','\nset key bottom left\nset xlabel 't'\nset ylabel 'fidelity'\nset yrange [0:1.02]\n"
       "plot 'fig6_linear.csv' using 1:3 with lines lw 1 lc rgb 'blue' title 'f_c linear', \\\n"
       "     'fig6_linear.csv' using 1:4 with lines lw 1 dt 2 lc rgb 'red' title 'f_g linear', \\\n"
       "     'fig6_optimized.csv' using 1:3 with lines lw 3 lc rgb 'blue' title 'f_c optimized', \\\n"
       "     'fig6_optimized.csv' using 1:4 with lines lw 3 dt 2 lc rgb 'red' title 'f_g optimized'\n"});
  return out;
}

// Noise riding on the optimized open-chain schedule, two window lengths.
inline RunResult fig7(const ReproduceOptions& o) {
  const double T = 0.6;
  const ProcessPtr process = make_process(open_chain(6, 2.0), Direction::cut);
  BfgsOptions bfgs = bfgs_for(o);
  bfgs.workers = o.workers;
  const OptimizationReport report = optimize_schedule(process, ScheduleKind::polynomial_cut, T, {0.0, 0.0},
                                                      Target::cut_fidelity, o.n_steps, bfgs);
  const ControlSchedule base = ControlSchedule::polynomial_cut(T, report.final_params);
  NoiseConfig noise;
  noise.strengths = o.quick ? std::vector<double>{0.0, 1.0} : std::vector<double>{0.0, 0.5, 1.0, 2.0, 4.0};
  noise.windows = {T / 60.0, T / 6.0};
  noise.realizations = o.quick ? 3 : 50;
  noise.seed = o.seed;
  const auto points = noise_study(process, base, noise, Target::cut_fidelity, o.n_steps, o.workers);

  RunResult out;
  out.files.push_back({"fig7.csv", noise_csv(points)});
  out.files.push_back({"fig7.gp", noise_gnuplot("fig7.csv", noise.windows)});
  out.seeds = noise_seeds(noise);
  out.results = {{"base_params", report.final_params}, {"noiseless", report.final_value}};
  out.summary = "base schedule (" + join_nums(report.final_params, ' ') + ") f_C = " + num(report.final_value) + "\n";
  for (const NoisePoint& p : points) {
    char line[128];
    std::snprintf(line, sizeof line, "dt = %-6.3g dg = %-4g mean f_C = %.4f std = %.4f\n", p.window, p.strength,
                  p.mean(), p.std_dev());
    out.summary += line;
  }
  return out;
}

// Axis spanning both the origin and the optimum with a margin.
inline LandscapeAxis covering_axis(std::size_t parameter, double optimum, int resolution) {
  const double pad = 0.25 * std::max(std::abs(optimum), 1.0);
  return {parameter, std::min(0.0, optimum) - pad, std::max(0.0, optimum) + pad, resolution};
}

inline RunResult fig8(const ReproduceOptions& o) {
  const double T = 0.6;
  const ProcessPtr process = make_process(ring(6, 2.0), Direction::cut);
  const int resolution = o.quick ? 4 : 41;
  BfgsOptions bfgs = bfgs_for(o);
  bfgs.workers = o.workers;
  RunResult out;
  for (const auto& [label, kind] :
       {std::pair{"polynomial", ScheduleKind::polynomial_cut}, std::pair{"sine", ScheduleKind::sine_cut}}) {
    const OptimizationReport opt =
        optimize_schedule(process, kind, T, {0.0, 0.0}, Target::cut_fidelity, o.n_steps, bfgs);
    LandscapeRun run;
    run.optimum = opt;
    run.grid = scan_landscape(fidelity_objective(process, kind, T, Target::cut_fidelity, o.n_steps), opt.final_params,
                              covering_axis(0, opt.final_params[0], resolution),
                              covering_axis(1, opt.final_params[1], resolution), o.workers);
    const std::string csv = std::string("fig8_") + label + ".csv";
    out.files.push_back({csv, landscape_csv(run)});
    out.files.push_back({std::string("fig8_") + label + ".gp", landscape_gnuplot(csv, run, kind)});
    const auto [i, j] = run.grid.argmax();
    out.results[label] = {{"optimum", opt.final_params},
                          {"optimum_value", opt.final_value},
                          {"grid_max", run.grid.max_value()},
                          {"grid_argmax", {run.grid.first.coordinate(i), run.grid.second.coordinate(j)}}};
    char line[200];
    std::snprintf(line, sizeof line, "%-10s optimum (%.3f, %.3f) f_C = %.4f; grid max %.4f at (%.3f, %.3f)\n", label,
                  opt.final_params[0], opt.final_params[1], opt.final_value, run.grid.max_value(),
                  run.grid.first.coordinate(i), run.grid.second.coordinate(j));
    out.summary += line;
  }
  return out;
}

}  // namespace detail

inline RunResult reproduce(std::string_view target, const ReproduceOptions& options) {
  if (options.n_steps < 1) throw ConfigError("n_steps", "must be at least 1");
  if (target == "table1") return detail::table1(options);
  if (target == "fig3") return detail::fig3(options);
  if (target == "fig6") return detail::fig6(options);
  if (target == "fig7") return detail::fig7(options);
  if (target == "fig8") return detail::fig8(options);
  if (target == "fig9") return detail::fig9(options);
  if (target == "stitch") return detail::stitch(options);
  throw ConfigError("reproduce", "unknown target \"" + std::string(target) + "\"");
}

}  // namespace spincut::harness

#endif  // SPINCUT_HARNESS_REPRODUCE_HPP
