#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "spincut/harness/cli.hpp"

namespace spincut::harness {
namespace {

namespace fs = std::filesystem;

json ring6(double T = 0.6, std::vector<double> params = {}) {
  return {{"chain", {{"n_spins", 6}, {"topology", "ring"}, {"J", 1.0}, {"B", 2.0}}},
          {"process", "cut"},
          {"schedule", {{"kind", "polynomial_cut"}, {"T", T}, {"params", params}}}};
}

std::string field_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spincut_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "spincut");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

TEST(Config, ValidationNamesTheField) {
  json doc = ring6();
  doc["chain"]["n_spins"] = 1;
  EXPECT_EQ(field_of(doc), "chain.n_spins");

  doc = ring6(0.0);
  EXPECT_EQ(field_of(doc), "schedule.T");
  doc = ring6(-2.0);
  EXPECT_EQ(field_of(doc), "schedule.T");

  doc = ring6();
  doc["n_steps"] = 0;
  EXPECT_EQ(field_of(doc), "n_steps");

  doc = ring6();
  doc["chain"]["cut_bonds"] = json::array();
  EXPECT_EQ(field_of(doc), "chain.cut_bonds");

  doc = ring6();
  doc["chain"]["cut_bonds"] = {{1, 3}};
  EXPECT_EQ(field_of(doc), "chain.cut_bonds");

  doc = ring6(0.6, {0.0, 0.0});
  doc["mode"] = "landscape";
  doc["landscape"] = {{"first", {{"param", 0}}}, {"second", {{"param", 2}}}};
  EXPECT_EQ(field_of(doc), "landscape.second.param");

  doc = ring6();
  doc["mode"] = "sweep";
  EXPECT_EQ(field_of(doc), "sweep");

  doc = ring6();
  doc["schedule"]["direction"] = "stitch";
  EXPECT_EQ(field_of(doc), "schedule.direction");

  doc = ring6();
  doc["schedule"]["kind"] = "spline";
  EXPECT_EQ(field_of(doc), "schedule.kind");

  doc = ring6();
  doc["chain"]["spins"] = 6;
  EXPECT_EQ(field_of(doc), "chain.spins");

  doc = ring6();
  doc["n_steps"] = "300";
  EXPECT_EQ(field_of(doc), "n_steps");

  doc = ring6();
  doc["mode"] = "noise";
  doc["noise"] = {{"dg", {0.0}}, {"dt", {0.1}}, {"realizations", 1}};
  EXPECT_EQ(field_of(doc), "noise.realizations");
}

TEST(Config, ForcedModeMustAgree) {
  json doc = ring6();
  doc["mode"] = "sweep";
  doc["sweep"] = {0.3};
  EXPECT_THROW(parse_config(doc, Mode::evolve), ConfigError);
  EXPECT_EQ(parse_config(doc, Mode::sweep).mode, Mode::sweep);
}

TEST(Config, RoundTripsThroughJsonAndManifests) {
  json doc = ring6(0.6, {1.0, 2.0});
  doc["mode"] = "noise";
  doc["noise"] = {{"dg", {0.0, 1.0}}, {"dt", {0.01}}, {"realizations", 4}, {"seed", 9}};
  doc["landscape"] = {{"first", {{"param", 1}, {"min", -2}, {"max", 2}, {"resolution", 3}}},
                      {"second", {{"param", 0}}}};
  const RunConfig c = parse_config(doc);
  EXPECT_EQ(c.chain.cut_bonds.size(), 2u);
  EXPECT_EQ(c.optimizer.target, Target::cut_fidelity);
  const json echoed = to_json(c);
  EXPECT_EQ(to_json(parse_config(echoed)), echoed);
  EXPECT_EQ(to_json(parse_config(json{{"config", echoed}, {"version", "x"}})), echoed);

  json stitch = ring6();
  stitch["process"] = "stitch";
  stitch["schedule"].erase("kind");
  const RunConfig s = parse_config(stitch);
  EXPECT_EQ(s.schedule.kind, ScheduleKind::polynomial_stitch);
  EXPECT_EQ(s.optimizer.target, Target::ground_fidelity);
}

TEST(Evolve, LinearRingCutMatchesTable) {
  json doc = ring6();
  doc["sample_stride"] = 10;
  const RunResult r = run(parse_config(doc));
  EXPECT_NEAR(r.results["f_c"].get<double>(), 0.865, 0.005);
  ASSERT_NE(r.find("trajectory.csv"), nullptr);
  EXPECT_EQ(r.find("trajectory.csv")->content.rfind("t,g,f_c,f_g,purity_A,entropy_A,entropy_B,gap\n", 0), 0u);
}

// The optimized cut leaves the instantaneous ground state further than the
// linear ramp does, yet ends with a better block fidelity.
TEST(Evolve, OptimizedCutIsLessAdiabatic) {
  const ProcessPtr process = make_process(ChainSpec::single_spin_cut(6, Topology::ring, 1.0, 2.0), Direction::cut);
  const auto linear = process->run(ControlSchedule::polynomial_cut(0.6), 300, 1);
  const auto optimized = process->run(ControlSchedule::polynomial_cut(0.6, {54.3, -36.3}), 300, 1);
  const double min_linear = *std::min_element(linear.record.f_g.begin(), linear.record.f_g.end());
  const double min_opt = *std::min_element(optimized.record.f_g.begin(), optimized.record.f_g.end());
  EXPECT_LT(min_opt, min_linear);
  EXPECT_GT(process->fidelities(optimized.state).f_c, process->fidelities(linear.state).f_c);
}

TEST(Evolve, FerromagnetSuddenCutIsPerfect) {
  json doc = ring6(1e-6);
  doc["chain"]["J"] = -1.0;
  doc["n_steps"] = 1;
  const RunResult r = run(parse_config(doc));
  EXPECT_NEAR(r.results["f_c"].get<double>(), 1.0, 1e-8);
}

json two_spin(double J, std::vector<double> pulses) {
  return {{"mode", "two_spin"},
          {"chain", {{"n_spins", 5}, {"topology", "open"}, {"J", J}, {"B", 2.1}, {"cut_bonds", {{2, 3}}}}},
          {"schedule", {{"kind", "pulse"}, {"T", 0.6}, {"params", pulses}}}};
}

TEST(TwoSpin, PulseControlBeatsLinearCut) {
  const RunResult r = run(parse_config(two_spin(1.0, {-5.4, 4.1})));
  EXPECT_EQ(r.results["block"], json({1, 2}));
  EXPECT_NEAR(r.results["linear_f_c"].get<double>(), 0.26, 0.02);
  EXPECT_NEAR(r.results["controlled_f_c"].get<double>(), 0.79, 0.02);
}

TEST(TwoSpin, FerromagnetSuddenCut) {
  json doc = two_spin(-1.0, {0.0});
  doc["schedule"]["T"] = 1e-6;
  const RunResult r = run(parse_config(doc));
  EXPECT_NEAR(r.results["controlled_f_c"].get<double>(), 1.0, 1e-8);
}

json small_noise() {
  json doc = ring6(0.6, {0.0, 0.0});
  doc["chain"]["topology"] = "open";
  doc["mode"] = "noise";
  doc["n_steps"] = 60;
  doc["noise"] = {{"dg", {0.0, 2.0}}, {"dt", {0.1}}, {"realizations", 3}, {"seed", 5}};
  return doc;
}

TEST(Noise, ZeroStrengthRowIsNoiseless) {
  const RunResult r = run(parse_config(small_noise()));
  const std::string csv = r.find("noise.csv")->content;
  std::istringstream lines(csv);
  std::string header, zero_row;
  std::getline(lines, header);
  std::getline(lines, zero_row);
  EXPECT_EQ(header, "dg,dt,mean_fc,std_fc,M");
  EXPECT_EQ(zero_row, "0,0.10000000000000001," + num(r.results["noiseless"].get<double>()) + ",0,3");
  EXPECT_EQ(r.seeds["master"], 5);
}

TEST(Noise, FixedSeedGivesIdenticalBytes) {
  const RunResult a = run(parse_config(small_noise()));
  json doc = small_noise();
  doc["workers"] = 3;
  const RunResult b = run(parse_config(doc));
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) EXPECT_EQ(a.files[i].content, b.files[i].content);
  doc["noise"]["seed"] = 6;
  EXPECT_NE(run(parse_config(doc)).find("noise.csv")->content, a.find("noise.csv")->content);
}

TEST(Sweep, StallIsRecordedInRow) {
  json doc = ring6(1.0, {0.0, 0.0});
  doc["mode"] = "sweep";
  doc["sweep"] = {0.3, 0.6};
  doc["n_steps"] = 40;
  doc["optimizer"] = {{"max_iterations", 0}};
  const RunResult r = run(parse_config(doc));
  const std::string csv = r.find("sweep.csv")->content;
  EXPECT_EQ(csv.rfind("T,f_baseline,f_opt,iterations,status,p1,p2\n", 0), 0u);
  EXPECT_NE(csv.find(",0,max_iterations,0,0\n"), std::string::npos);
}

TEST(Landscape, SmallGridCarriesOptimumMarker) {
  json doc = ring6(0.6, {0.0, 0.0});
  doc["mode"] = "landscape";
  doc["n_steps"] = 30;
  doc["optimizer"] = {{"max_iterations", 2}};
  doc["landscape"] = {{"first", {{"param", 0}, {"min", -5}, {"max", 5}, {"resolution", 3}}},
                      {"second", {{"param", 1}, {"min", -5}, {"max", 5}, {"resolution", 3}}}};
  const RunResult r = run(parse_config(doc));
  const std::string csv = r.find("landscape.csv")->content;
  EXPECT_NE(csv.find("# optimum: "), std::string::npos);
  EXPECT_NE(r.find("landscape.gp"), nullptr);
  EXPECT_TRUE(r.results.contains("max_within_one_cell"));
}

TEST(Reproduce, ConcurrentPipelinesMatchSerial) {
  ReproduceOptions o;
  o.quick = true;
  o.n_steps = 12;
  std::vector<RunResult> serial;
  for (auto target : kReproduceTargets) serial.push_back(reproduce(target, o));
  std::vector<std::future<RunResult>> jobs;
  for (auto target : kReproduceTargets) {
    jobs.push_back(std::async(std::launch::async, [target, o] { return reproduce(target, o); }));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const RunResult parallel = jobs[i].get();
    ASSERT_EQ(parallel.files.size(), serial[i].files.size()) << kReproduceTargets[i];
    for (std::size_t f = 0; f < parallel.files.size(); ++f) {
      EXPECT_EQ(parallel.files[f].name, serial[i].files[f].name);
      EXPECT_EQ(parallel.files[f].content, serial[i].files[f].content) << parallel.files[f].name;
    }
  }
  EXPECT_THROW(reproduce("fig5", o), ConfigError);
}

TEST(Output, ChecksumIsFnv1a) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(fnv1a64("foobar")), "85944171f73967e8");
}

TEST(Cli, ManifestRerunReproducesBytes) {
  const fs::path dir = scratch("rerun");
  json doc = small_noise();
  doc["output_dir"] = (dir / "run").string();
  std::ofstream(dir / "config.json") << doc.dump();
  std::string out;
  ASSERT_EQ(cli({"noise", "--config", (dir / "config.json").string(), "--seed", "11"}, &out), 0);
  const json manifest = json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["noise"]["seed"], 11);
  EXPECT_EQ(manifest["seeds"]["master"], 11);
  EXPECT_EQ(manifest["outputs"]["noise.csv"]["fnv1a64"], hex64(fnv1a64(slurp(dir / "run" / "noise.csv"))));

  ASSERT_EQ(cli({"rerun", (dir / "run" / "manifest.json").string(), "--out", (dir / "again").string()}, &out), 0);
  EXPECT_NE(out.find("identical  noise.csv"), std::string::npos);
  EXPECT_EQ(slurp(dir / "run" / "noise.csv"), slurp(dir / "again" / "noise.csv"));

  // a manifest is also accepted wherever a config is
  ASSERT_EQ(cli({"noise", "--config", (dir / "run" / "manifest.json").string(), "--out", (dir / "third").string()}),
            0);
  EXPECT_EQ(slurp(dir / "run" / "noise.csv"), slurp(dir / "third" / "noise.csv"));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  std::string err;

  json bad = ring6();
  bad["chain"]["n_spins"] = 1;
  std::ofstream(dir / "bad.json") << bad.dump();
  EXPECT_EQ(cli({"evolve", "--config", (dir / "bad.json").string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("chain.n_spins"), std::string::npos);

  EXPECT_EQ(cli({"evolve"}, nullptr, &err), 2);
  EXPECT_EQ(cli({"reproduce", "fig5"}, nullptr, &err), 2);
  EXPECT_EQ(cli({"evolve", "--config", (dir / "bad.json").string(), "--format", "tsv"}, nullptr, &err), 2);

  // a lone spin with B = 0 has no unique ground state
  json degenerate = ring6();
  degenerate["chain"] = {{"n_spins", 3}, {"topology", "open"}, {"J", 1.0}, {"B", 0.0}};
  degenerate["output_dir"] = (dir / "deg").string();
  std::ofstream(dir / "deg.json") << degenerate.dump();
  EXPECT_EQ(cli({"evolve", "--config", (dir / "deg.json").string()}, nullptr, &err), 3);

  json good = ring6();
  good["n_steps"] = 10;
  std::ofstream(dir / "good.json") << good.dump();
  std::ofstream(dir / "blocker") << "x";
  EXPECT_EQ(cli({"evolve", "--config", (dir / "good.json").string(), "--out", (dir / "blocker" / "sub").string()},
                nullptr, &err),
            4);
  EXPECT_EQ(cli({"evolve", "--config", (dir / "missing.json").string()}, nullptr, &err), 4);

  EXPECT_EQ(cli({"evolve", "--config", (dir / "good.json").string(), "--out", (dir / "ok").string()}), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir / "ok" / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "ok" / ".spincut-probe"));
}

}  // namespace
}  // namespace spincut::harness
