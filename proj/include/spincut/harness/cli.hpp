#ifndef SPINCUT_HARNESS_CLI_HPP
#define SPINCUT_HARNESS_CLI_HPP

// Command-line driver. Exit codes: 0 ok, 2 bad config or usage, 3 unresolvable
// degeneracy, 4 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spincut/errors.hpp"
#include "spincut/harness/config.hpp"
#include "spincut/harness/output.hpp"
#include "spincut/harness/reproduce.hpp"
#include "spincut/harness/runners.hpp"

namespace spincut::harness {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

inline int exit_code_for(const std::exception_ptr& error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DegeneracyError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string format = "csv";
};

inline void add_common(CLI::App& cmd, CommonFlags& f, bool with_config) {
  if (with_config) cmd.add_option("--config", f.config, "run config (JSON) or a manifest.json")->required();
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_option("--steps", f.steps, "integration steps")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", f.seed, "master noise seed");
  cmd.add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd.add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv"}));
}

/// Computes, writes the files plus manifest, prints the summary.
inline void execute(const std::filesystem::path& dir, const nlohmann::json& echo,
                    const std::function<RunResult()>& compute, std::ostream& out) {
  probe_writable(dir);
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult result = compute();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  persist(dir, result, make_manifest(echo, result, started, wall));
  out << result.summary;
  out << "wrote " << result.files.size() + 1 << " files to " << dir.string() << "\n";
}

inline RunConfig resolve_config(Mode mode, const CommonFlags& f) {
  RunConfig c = parse_config(read_json_file(f.config), mode);
  if (f.out) c.output_dir = *f.out;
  if (f.steps) c.n_steps = *f.steps;
  if (f.workers) c.workers = *f.workers;
  if (f.seed) {
    if (!c.noise) throw ConfigError("seed", "--seed only applies to runs with a noise block");
    c.noise->seed = *f.seed;
  }
  return c;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cut and stitch Heisenberg spin chains with an optimized bond coupling g(t)."};
  app.require_subcommand(1);

  std::vector<std::pair<Mode, CommonFlags>> modes;
  modes.reserve(6);
  std::vector<CLI::App*> mode_cmds;
  for (auto [mode, help] : {std::pair{Mode::evolve, "propagate one schedule and record the trajectory"},
                            std::pair{Mode::optimize, "BFGS over the schedule parameters"},
                            std::pair{Mode::sweep, "baseline and optimized fidelity for a list of T"},
                            std::pair{Mode::landscape, "fidelity on a 2-D parameter grid"},
                            std::pair{Mode::noise, "fidelity under seeded piecewise-constant noise"},
                            std::pair{Mode::two_spin, "cut a multi-spin block"}}) {
    modes.emplace_back(mode, CommonFlags{});
    const std::string name = mode == Mode::two_spin ? "two-spin" : std::string(to_string(mode));
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(*cmd, modes.back().second, true);
    mode_cmds.push_back(cmd);
  }

  CommonFlags repro_flags;
  std::string target;
  bool quick = false;
  CLI::App* repro = app.add_subcommand("reproduce", "regenerate a published table or figure");
  repro->add_option("target", target, "table1, fig3, fig6, fig7, fig8, fig9 or stitch")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(kReproduceTargets.begin(), kReproduceTargets.end())));
  repro->add_flag("--quick", quick, "tiny grids and iteration budgets (smoke test)");
  add_common(*repro, repro_flags, false);

  std::string manifest_path;
  std::optional<std::string> rerun_out;
  CLI::App* rerun = app.add_subcommand("rerun", "repeat a run from its manifest and compare checksums");
  rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun->add_option("--out", rerun_out, "output directory (default: <manifest dir>/rerun)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (!mode_cmds[i]->parsed()) continue;
      const RunConfig c = resolve_config(modes[i].first, modes[i].second);
      execute(c.output_dir, to_json(c), [&] { return run(c); }, out);
      return kOk;
    }
    if (repro->parsed()) {
      ReproduceOptions o;
      o.quick = quick;
      if (repro_flags.steps) o.n_steps = *repro_flags.steps;
      if (repro_flags.workers) o.workers = *repro_flags.workers;
      if (repro_flags.seed) o.seed = *repro_flags.seed;
      const std::filesystem::path dir = repro_flags.out.value_or("out/" + target);
      execute(dir, to_json(target, o), [&] { return reproduce(target, o); }, out);
      return kOk;
    }
    if (rerun->parsed()) {
      const nlohmann::json manifest = read_json_file(manifest_path);
      if (!manifest.contains("config")) throw ConfigError("config", "not a manifest");
      const nlohmann::json& echo = manifest.at("config");
      const std::filesystem::path dir =
          rerun_out.value_or((std::filesystem::path(manifest_path).parent_path() / "rerun").string());
      RunResult result;
      auto compute = [&] {
        if (echo.contains("reproduce")) {
          ReproduceOptions o;
          o.n_steps = echo.value("n_steps", 300);
          o.workers = echo.value("workers", 1);
          o.quick = echo.value("quick", false);
          o.seed = echo.value("seed", std::uint64_t{1});
          result = reproduce(echo.at("reproduce").get<std::string>(), o);
        } else {
          result = run(parse_config(echo));
        }
        return result;
      };
      execute(dir, echo, compute, out);
      const nlohmann::json now = checksums(result);
      const nlohmann::json& before = manifest.value("outputs", nlohmann::json::object());
      bool same = now == before;
      for (const auto& [name, sum] : before.items()) {
        const bool match = now.contains(name) && now.at(name) == sum;
        out << (match ? "identical  " : "DIFFERENT  ") << name << "\n";
      }
      if (!same) {
        err << "rerun outputs differ from the manifest\n";
        return kFailure;
      }
      return kOk;
    }
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kFailure;
}

}  // namespace spincut::harness

#endif  // SPINCUT_HARNESS_CLI_HPP
