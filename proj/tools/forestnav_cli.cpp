// Command-line front end: run, bench, replay, gen-forest.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "forestnav/benchmark.hpp"
#include "forestnav/forest.hpp"
#include "forestnav/metrics.hpp"
#include "forestnav/mission.hpp"
#include "forestnav/scenario.hpp"

using namespace forestnav;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path);
}

ScenarioConfig load_config(const std::string& path) {
  if (path.empty()) return ScenarioConfig{};
  return ScenarioConfig::parse(read_file(path));
}

json metrics_json(const MissionMetrics& m) {
  return {{"flight_id", m.flight_id},
          {"success", m.success},
          {"failure_cause", m.failure_cause ? json(to_string(*m.failure_cause)) : json(nullptr)},
          {"terminal", vec_to_json(m.terminal)},
          {"t_true", m.t_true},
          {"d", m.d},
          {"v_true", m.v_true},
          {"v_p2p", m.v_p2p},
          {"t_extra", m.t_extra},
          {"collisions", m.collisions},
          {"fatal_collision", m.fatal_collision},
          {"leaf_dodges", m.leaf_dodges},
          {"emergency_stops", m.emergency_stops},
          {"emergency_stop_total", m.emergency_stop_total}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Under-canopy flight stack simulator and benchmark harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Fly a single mission and print its metrics as JSON");
  std::string run_config, run_log, run_variant;
  int run_flight = 0;
  run->add_option("-c,--config", run_config, "Scenario JSON (defaults when omitted)");
  run->add_option("-f,--flight", run_flight, "Flight index")->check(CLI::NonNegativeNumber);
  run->add_option("-l,--log", run_log, "Write the FlightLog (JSON lines) here");
  run->add_option("--variant", run_variant, "Override the system variant")->check(CLI::IsMember({"original", "optimized"}));

  // bench
  auto* bench = app.add_subcommand("bench", "Run a suite and write aggregate.csv, flights.csv, report.json");
  std::string bench_config, bench_suite, bench_out = "bench_out", bench_logs;
  int bench_repeats = 0, bench_jobs = 0;
  bool bench_no_logs = false;
  bench->add_option("-c,--config", bench_config, "Base scenario JSON for the default suite (replaces the built-in bench profile)");
  bench->add_option("-s,--suite", bench_suite, "JSON array of scenario configs instead of the default suite");
  bench->add_option("-o,--out", bench_out, "Report directory")->capture_default_str();
  bench->add_option("--logs", bench_logs, "FlightLog directory (default: <out>/logs)");
  bench->add_flag("--no-logs", bench_no_logs, "Do not write FlightLogs");
  bench->add_option("-r,--repeats", bench_repeats, "Override repeats per scenario")->check(CLI::PositiveNumber);
  bench->add_option("-j,--jobs", bench_jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  // replay
  auto* replay = app.add_subcommand("replay", "Re-derive metrics from FlightLogs");
  std::vector<std::string> replay_logs;
  std::string replay_format = "csv";
  replay->add_option("logs", replay_logs, "FlightLog files")->required()->check(CLI::ExistingFile);
  replay->add_option("--format", replay_format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  // gen-forest
  auto* gen = app.add_subcommand("gen-forest", "Generate a forest scene and dump it as JSON");
  std::string gen_config, gen_out, gen_branch;
  std::optional<double> gen_density;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("-c,--config", gen_config, "Scenario JSON supplying forest and mission settings");
  gen->add_option("-d,--density", gen_density, "Trees per hectare");
  gen->add_option("--seed", gen_seed, "Forest seed");
  gen->add_option("--branch-level", gen_branch, "low, medium or high")->check(CLI::IsMember({"low", "medium", "high"}));
  gen->add_option("-o,--out", gen_out, "Output file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ScenarioConfig cfg = load_config(run_config);
      if (!run_variant.empty()) cfg.variant = variant_from_string(run_variant);
      const FlightLog log = run_mission(cfg, run_flight);
      if (!run_log.empty()) write_file(run_log, log.to_jsonl());
      std::cout << metrics_json(compute(log)).dump(2) << '\n';
    } else if (*bench) {
      std::vector<ScenarioConfig> suite;
      if (!bench_suite.empty()) {
        const json j = json::parse(read_file(bench_suite));
        if (!j.is_array()) throw std::invalid_argument("suite file must hold a JSON array of scenarios");
        for (const auto& s : j) suite.push_back(ScenarioConfig::from_json(s));
      } else {
        suite = bench_config.empty() ? default_suite() : default_suite(load_config(bench_config));
      }
      BenchmarkOptions opt;
      opt.jobs = bench_jobs;
      if (bench_repeats > 0) opt.repeats_override = bench_repeats;
      if (!bench_no_logs) opt.log_dir = bench_logs.empty() ? std::filesystem::path(bench_out) / "logs" : std::filesystem::path(bench_logs);
      const BenchmarkResult result = run_benchmark(suite, opt);
      write_reports(result, bench_out);
      std::cout << aggregate_csv(result);
    } else if (*replay) {
      std::vector<MissionMetrics> all;
      json arr = json::array();
      if (replay_format == "csv") std::cout << "log,success,failure_cause,t_true,d,v_true,v_p2p,t_extra,collisions\n";
      for (const auto& path : replay_logs) {
        std::ifstream is(path, std::ios::binary);
        const FlightLog log = FlightLog::read_jsonl(is);
        const MissionMetrics m = compute(log);
        all.push_back(m);
        if (replay_format == "json") {
          arr.push_back(metrics_json(m));
        } else {
          std::printf("%s,%s,%s,%.3f,%.3f,%.4f,%.4f,%.3f,%d\n", path.c_str(), m.success ? "yes" : "no",
                      m.failure_cause ? to_string(*m.failure_cause).c_str() : "", m.t_true, m.d, m.v_true, m.v_p2p,
                      m.t_extra, m.collisions);
        }
      }
      const BatchReport agg = aggregate(all);
      if (replay_format == "json") {
        std::cout << json{{"flights", arr},
                          {"success_rate", agg.success_rate},
                          {"mean_v_p2p", agg.mean_v_p2p},
                          {"mean_v_true", agg.mean_v_true},
                          {"mean_t_extra", agg.mean_t_extra}}
                         .dump(2)
                  << '\n';
      } else {
        std::printf("# success %s, mean v_p2p %.3f, mean v_true %.3f, mean t_extra %.2f\n", agg.success_rate.c_str(),
                    agg.mean_v_p2p, agg.mean_v_true, agg.mean_t_extra);
      }
    } else if (*gen) {
      ScenarioConfig cfg = load_config(gen_config);
      if (gen_density) cfg.forest.density = *gen_density;
      if (gen_seed) cfg.forest.seed = *gen_seed;
      if (!gen_branch.empty()) cfg.forest.branch_level = branch_level_from_string(gen_branch);
      cfg.validate();
      const ForestScene scene = generate_forest(forest_params(cfg));
      const std::string text = scene.to_json() + "\n";
      if (gen_out.empty()) std::cout << text;
      else write_file(gen_out, text);
      std::cerr << scene.trees.size() << " trees, " << scene.branch_count() << " branches, realized density "
                << scene.realized_density() << " trees/ha (" << to_string(scene.complexity) << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
