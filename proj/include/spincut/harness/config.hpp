#ifndef SPINCUT_HARNESS_CONFIG_HPP
#define SPINCUT_HARNESS_CONFIG_HPP

// Run configuration: one JSON object per experiment. Every field is checked
// before any Hamiltonian is built; failures name the offending key path.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spincut/control.hpp"
#include "spincut/errors.hpp"
#include "spincut/optim.hpp"
#include "spincut/spin_core.hpp"

namespace spincut::harness {

using nlohmann::json;

enum class Mode { evolve, optimize, sweep, landscape, noise, two_spin };

inline std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::evolve: return "evolve";
    case Mode::optimize: return "optimize";
    case Mode::sweep: return "sweep";
    case Mode::landscape: return "landscape";
    case Mode::noise: return "noise";
    case Mode::two_spin: return "two_spin";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::evolve, Mode::optimize, Mode::sweep, Mode::landscape, Mode::noise, Mode::two_spin}) {
    if (to_string(m) == name) return m;
  }
  if (name == "two-spin") return Mode::two_spin;
  return std::nullopt;
}

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::polynomial_cut;
  double duration = 1.0;
  std::vector<double> params;
  Direction direction = Direction::cut;

  ControlSchedule build() const { return ControlSchedule(kind, duration, params, direction); }
  ControlSchedule build(double T, const std::vector<double>& p) const { return ControlSchedule(kind, T, p, direction); }
};

struct MultistartSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  int per_axis = 3;
};

struct OptimizerConfig {
  bool enabled = true;
  Target target = Target::cut_fidelity;
  BfgsOptions bfgs;
  std::optional<MultistartSpec> multistart;
};

struct LandscapeConfig {
  LandscapeAxis first{0, -1.0, 1.0, 11};
  LandscapeAxis second{1, -1.0, 1.0, 11};
  bool mark_optimum = true;
};

struct NoiseConfig {
  std::vector<double> strengths;  // dg
  std::vector<double> windows;    // dt
  int realizations = 50;
  std::uint64_t seed = 1;
  bool optimize_first = false;
};

struct RunConfig {
  Mode mode = Mode::evolve;
  ChainSpec chain;
  Direction process = Direction::cut;
  ScheduleSpec schedule;
  int n_steps = 300;
  int sample_stride = 1;
  std::vector<double> sweep;
  OptimizerConfig optimizer;
  std::optional<LandscapeConfig> landscape;
  std::optional<NoiseConfig> noise;
  std::string output_dir = "out";
  int workers = 1;

  /// Objective options with the run's worker count filled in.
  BfgsOptions bfgs() const {
    BfgsOptions o = optimizer.bfgs;
    o.workers = workers;
    return o;
  }
};

namespace detail {

// Small reader that remembers where it is so errors can name the field.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) const { return node_.contains(std::string(key)); }

  const json& raw(std::string_view key) const { return node_.at(std::string(key)); }

  Reader child(std::string_view key) const { return Reader(raw(key), field(key)); }

  double number(std::string_view key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
    return x;
  }

  long long integer(std::string_view key, long long fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(v.get<long long>());
  }

  bool boolean(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_boolean()) throw ConfigError(field(key), "expected true or false");
    return raw(key).get<bool>();
  }

  std::string text(std::string_view key, std::string fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_string()) throw ConfigError(field(key), "expected a string");
    return raw(key).get<std::string>();
  }

  std::vector<double> numbers(std::string_view key) const {
    if (!has(key)) return {};
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string where = field(key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_number()) throw ConfigError(where, "expected a number");
      out.push_back(v[i].get<double>());
      if (!std::isfinite(out.back())) throw ConfigError(where, "must be finite");
    }
    return out;
  }

  void only(std::initializer_list<std::string_view> known) const {
    const std::set<std::string_view> allowed(known);
    for (const auto& [key, value] : node_.items()) {
      if (!allowed.contains(key)) throw ConfigError(field(key), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
};

template <class Fn>
auto as_config_error(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ArgumentError& e) {
    throw ConfigError(field, e.what());
  }
}

inline int checked_int(const Reader& r, std::string_view key, int fallback, int minimum) {
  const long long v = r.integer(key, fallback);
  if (v < minimum || v > 1'000'000'000) {
    throw ConfigError(r.field(key), "must be at least " + std::to_string(minimum) + ", got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

inline ChainSpec parse_chain(const Reader& r) {
  r.only({"n_spins", "topology", "J", "B", "cut_bonds"});
  const long long n = r.integer("n_spins", 6);
  if (n < 2) throw ConfigError(r.field("n_spins"), "must be at least 2, got " + std::to_string(n));
  if (n > kDefaultMaxSpins) {
    throw ConfigError(r.field("n_spins"), "exceeds the cap of " + std::to_string(kDefaultMaxSpins));
  }
  const std::string topo = r.text("topology", "ring");
  if (topo != "ring" && topo != "open") throw ConfigError(r.field("topology"), "expected \"ring\" or \"open\"");
  const Topology topology = topo == "ring" ? Topology::ring : Topology::open;
  if (topology == Topology::ring && n < 3) throw ConfigError(r.field("n_spins"), "a ring needs at least 3 spins");

  ChainSpec chain = ChainSpec::single_spin_cut(static_cast<int>(n), topology, r.number("J", 1.0), r.number("B", 0.0));
  if (r.has("cut_bonds")) {
    const json& bonds = r.raw("cut_bonds");
    if (!bonds.is_array()) throw ConfigError(r.field("cut_bonds"), "expected an array of [i, j] pairs");
    if (bonds.empty()) throw ConfigError(r.field("cut_bonds"), "empty cut set");
    chain.cut_bonds.clear();
    for (std::size_t k = 0; k < bonds.size(); ++k) {
      const std::string where = r.field("cut_bonds") + "[" + std::to_string(k) + "]";
      const json& b = bonds[k];
      if (!b.is_array() || b.size() != 2 || !b[0].is_number_integer() || !b[1].is_number_integer()) {
        throw ConfigError(where, "expected a pair of site indices");
      }
      chain.cut_bonds.emplace_back(b[0].get<int>(), b[1].get<int>());
    }
  }
  as_config_error(r.field("cut_bonds"), [&] {
    chain.validate();
    detached_block(chain);
    return 0;
  });
  return chain;
}

inline LandscapeAxis parse_axis(const Reader& r, std::size_t n_params) {
  r.only({"param", "min", "max", "resolution"});
  LandscapeAxis axis;
  const long long p = r.integer("param", 0);
  if (p < 0 || static_cast<std::size_t>(p) >= n_params) {
    throw ConfigError(r.field("param"), "parameter " + std::to_string(p) + " does not exist; the schedule has " +
                                            std::to_string(n_params) + " free parameters");
  }
  axis.parameter = static_cast<std::size_t>(p);
  axis.min = r.number("min", -1.0);
  axis.max = r.number("max", 1.0);
  if (!(axis.max > axis.min)) throw ConfigError(r.field("max"), "must exceed min");
  axis.resolution = checked_int(r, "resolution", 11, 2);
  return axis;
}

}  // namespace detail

/// Fields each mode cannot run without.
inline void check_mode_requirements(const RunConfig& c) {
  switch (c.mode) {
    case Mode::sweep:
      if (c.sweep.empty()) throw ConfigError("sweep", "sweep mode needs a nonempty list of T values");
      break;
    case Mode::landscape:
      if (!c.landscape) throw ConfigError("landscape", "landscape mode needs two axes");
      break;
    case Mode::noise:
      if (!c.noise) throw ConfigError("noise", "noise mode needs a noise block");
      break;
    case Mode::optimize:
      if (c.schedule.params.empty()) throw ConfigError("schedule.params", "nothing to optimize: give a starting point");
      break;
    default:
      break;
  }
}

/// Parses a config object, or the "config" member of a run manifest. A
/// `forced` mode (from the command line) must agree with any "mode" key.
inline RunConfig parse_config(const json& document, std::optional<Mode> forced = std::nullopt) {
  const json& root = document.contains("config") && document.at("config").is_object() ? document.at("config") : document;
  const detail::Reader r(root, "");
  r.only({"mode", "chain", "process", "schedule", "n_steps", "sample_stride", "sweep", "optimizer", "landscape",
          "noise", "output_dir", "workers"});

  RunConfig c;
  const std::string mode = r.text("mode", forced ? std::string(to_string(*forced)) : "evolve");
  const auto parsed = parse_mode(mode);
  if (!parsed) throw ConfigError("mode", "unknown mode \"" + mode + "\"");
  if (forced && *parsed != *forced) {
    throw ConfigError("mode", "config is for \"" + mode + "\" but \"" + std::string(to_string(*forced)) + "\" was requested");
  }
  c.mode = *parsed;

  if (!r.has("chain")) throw ConfigError("chain", "missing");
  c.chain = detail::parse_chain(r.child("chain"));

  const std::string process = r.text("process", "cut");
  c.process = detail::as_config_error("process", [&] { return parse_direction(process); });

  c.schedule.direction = c.process;
  c.schedule.kind = c.process == Direction::cut ? ScheduleKind::polynomial_cut : ScheduleKind::polynomial_stitch;
  if (r.has("schedule")) {
    const detail::Reader s = r.child("schedule");
    s.only({"kind", "T", "params", "direction"});
    if (s.has("kind")) {
      c.schedule.kind = detail::as_config_error(s.field("kind"), [&] { return parse_schedule_kind(s.text("kind", "")); });
    }
    c.schedule.duration = s.number("T", 1.0);
    c.schedule.params = s.numbers("params");
    if (s.has("direction")) {
      const Direction d = detail::as_config_error(s.field("direction"), [&] { return parse_direction(s.text("direction", "")); });
      if (d != c.process) throw ConfigError(s.field("direction"), "does not match process");
    }
  }
  if (!(c.schedule.duration > 0.0)) {
    throw ConfigError("schedule.T", "must be > 0, got " + std::to_string(c.schedule.duration));
  }
  detail::as_config_error("schedule", [&] { return c.schedule.build(); });

  c.n_steps = detail::checked_int(r, "n_steps", 300, 1);
  c.sample_stride = detail::checked_int(r, "sample_stride", 1, 1);
  c.workers = detail::checked_int(r, "workers", 1, 1);
  c.output_dir = r.text("output_dir", "out");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  c.sweep = r.numbers("sweep");
  for (std::size_t i = 0; i < c.sweep.size(); ++i) {
    if (!(c.sweep[i] > 0.0)) throw ConfigError("sweep[" + std::to_string(i) + "]", "T must be > 0");
  }

  c.optimizer.target = c.process == Direction::cut ? Target::cut_fidelity : Target::ground_fidelity;
  if (r.has("optimizer")) {
    const detail::Reader o = r.child("optimizer");
    o.only({"enabled", "target", "gradient_step", "tolerance", "max_iterations", "multistart"});
    c.optimizer.enabled = o.boolean("enabled", true);
    const std::string target = o.text("target", std::string(to_string(c.optimizer.target)));
    if (target == "cut_fidelity") {
      c.optimizer.target = Target::cut_fidelity;
    } else if (target == "ground_fidelity") {
      c.optimizer.target = Target::ground_fidelity;
    } else {
      throw ConfigError(o.field("target"), "expected \"cut_fidelity\" or \"ground_fidelity\"");
    }
    c.optimizer.bfgs.gradient_step = o.number("gradient_step", kGradientStep);
    if (!(c.optimizer.bfgs.gradient_step > 0.0)) throw ConfigError(o.field("gradient_step"), "must be > 0");
    c.optimizer.bfgs.tolerance = o.number("tolerance", 1e-4);
    if (!(c.optimizer.bfgs.tolerance > 0.0)) throw ConfigError(o.field("tolerance"), "must be > 0");
    c.optimizer.bfgs.max_iterations = detail::checked_int(o, "max_iterations", 200, 0);
    if (o.has("multistart")) {
      const detail::Reader m = o.child("multistart");
      m.only({"lower", "upper", "per_axis"});
      MultistartSpec spec{m.numbers("lower"), m.numbers("upper"), detail::checked_int(m, "per_axis", 3, 1)};
      if (spec.lower.size() != c.schedule.params.size() || spec.upper.size() != c.schedule.params.size()) {
        throw ConfigError(m.field("lower"), "lower and upper need one entry per schedule parameter");
      }
      c.optimizer.multistart = spec;
    }
  }

  if (r.has("landscape")) {
    const detail::Reader l = r.child("landscape");
    l.only({"first", "second", "mark_optimum"});
    LandscapeConfig land;
    if (!l.has("first")) throw ConfigError(l.field("first"), "missing");
    if (!l.has("second")) throw ConfigError(l.field("second"), "missing");
    land.first = detail::parse_axis(l.child("first"), c.schedule.params.size());
    land.second = detail::parse_axis(l.child("second"), c.schedule.params.size());
    if (land.first.parameter == land.second.parameter) {
      throw ConfigError(l.field("second.param"), "must differ from first.param");
    }
    land.mark_optimum = l.boolean("mark_optimum", true);
    c.landscape = land;
  }

  if (r.has("noise")) {
    const detail::Reader n = r.child("noise");
    n.only({"dg", "dt", "realizations", "seed", "optimize"});
    NoiseConfig noise;
    noise.strengths = n.numbers("dg");
    noise.windows = n.numbers("dt");
    if (noise.strengths.empty()) throw ConfigError(n.field("dg"), "needs at least one strength");
    if (noise.windows.empty()) throw ConfigError(n.field("dt"), "needs at least one window length");
    for (std::size_t i = 0; i < noise.strengths.size(); ++i) {
      if (noise.strengths[i] < 0.0) throw ConfigError(n.field("dg") + "[" + std::to_string(i) + "]", "must be >= 0");
    }
    for (std::size_t i = 0; i < noise.windows.size(); ++i) {
      if (!(noise.windows[i] > 0.0)) throw ConfigError(n.field("dt") + "[" + std::to_string(i) + "]", "must be > 0");
    }
    noise.realizations = detail::checked_int(n, "realizations", 50, 2);
    noise.seed = n.unsigned_integer("seed", 1);
    noise.optimize_first = n.boolean("optimize", false);
    c.noise = noise;
  }

  check_mode_requirements(c);
  return c;
}

inline json to_json(const RunConfig& c) {
  json chain = {{"n_spins", c.chain.n_spins},
                {"topology", c.chain.topology == Topology::ring ? "ring" : "open"},
                {"J", c.chain.exchange},
                {"B", c.chain.field},
                {"cut_bonds", json::array()}};
  for (const Bond& b : c.chain.cut_bonds) chain["cut_bonds"].push_back({b.first, b.second});

  json out = {{"mode", to_string(c.mode)},
              {"chain", chain},
              {"process", to_string(c.process)},
              {"schedule",
               {{"kind", to_string(c.schedule.kind)},
                {"T", c.schedule.duration},
                {"params", c.schedule.params},
                {"direction", to_string(c.schedule.direction)}}},
              {"n_steps", c.n_steps},
              {"sample_stride", c.sample_stride},
              {"output_dir", c.output_dir},
              {"workers", c.workers}};
  if (!c.sweep.empty()) out["sweep"] = c.sweep;

  json opt = {{"enabled", c.optimizer.enabled},
              {"target", to_string(c.optimizer.target)},
              {"gradient_step", c.optimizer.bfgs.gradient_step},
              {"tolerance", c.optimizer.bfgs.tolerance},
              {"max_iterations", c.optimizer.bfgs.max_iterations}};
  if (c.optimizer.multistart) {
    opt["multistart"] = {{"lower", c.optimizer.multistart->lower},
                         {"upper", c.optimizer.multistart->upper},
                         {"per_axis", c.optimizer.multistart->per_axis}};
  }
  out["optimizer"] = opt;

  if (c.landscape) {
    auto axis = [](const LandscapeAxis& a) {
      return json{{"param", a.parameter}, {"min", a.min}, {"max", a.max}, {"resolution", a.resolution}};
    };
    out["landscape"] = {{"first", axis(c.landscape->first)},
                        {"second", axis(c.landscape->second)},
                        {"mark_optimum", c.landscape->mark_optimum}};
  }
  if (c.noise) {
    out["noise"] = {{"dg", c.noise->strengths},
                    {"dt", c.noise->windows},
                    {"realizations", c.noise->realizations},
                    {"seed", c.noise->seed},
                    {"optimize", c.noise->optimize_first}};
  }
  return out;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_json_file(path)); }

}  // namespace spincut::harness

#endif  // SPINCUT_HARNESS_CONFIG_HPP
