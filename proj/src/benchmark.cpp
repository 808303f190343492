#include "forestnav/benchmark.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "forestnav/mission.hpp"

namespace forestnav {

using nlohmann::json;

ScenarioConfig bench_profile() {
  ScenarioConfig c;
  c.map_resolution = 0.2;
  c.lidar.rays_per_scan = 3000;
  c.lidar.range_noise_sd = 0.03;
  c.sim.planner_budget = 5000;
  c.leaf_profile = LeafProfile::Occasionally;
  c.nan.rate_per_minute = 0.5;
  return c;
}

std::vector<ScenarioConfig> default_suite(const ScenarioConfig& base) {
  struct Forest {
    const char* name;
    double density;
  };
  const Forest forests[] = {{"medium", 1040.0}, {"difficult", 2220.0}};
  const double speeds[] = {1.0, 2.0};
  const Variant variants[] = {Variant::Original, Variant::Optimized};
  std::vector<ScenarioConfig> suite;
  for (std::size_t f = 0; f < 2; ++f) {
    for (double v : speeds) {
      for (Variant var : variants) {
        ScenarioConfig c = base;
        c.forest.density = forests[f].density;
        // Both variants of a cell fly the same forest with the same per-flight seeds.
        c.forest.seed = base.forest.seed + 100 * f;
        c.seed = base.seed + 1000 * f + static_cast<std::uint64_t>(v) * 100;
        c.mission.v_target = v;
        c.variant = var;
        char name[96];
        std::snprintf(name, sizeof name, "%s_%gms_%s", forests[f].name, v, to_string(var).c_str());
        c.name = name;
        suite.push_back(std::move(c));
      }
    }
  }
  return suite;
}

std::string log_file_name(const ScenarioConfig& cfg, int flight_index) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_%02d.jsonl", cfg.name.c_str(), flight_index);
  return buf;
}

BenchmarkResult run_benchmark(std::span<const ScenarioConfig> suite, const BenchmarkOptions& options) {
  if (suite.empty()) throw std::invalid_argument("benchmark suite is empty");
  std::vector<ScenarioConfig> configs(suite.begin(), suite.end());
  for (auto& c : configs) {
    if (options.repeats_override) c.mission.repeats = *options.repeats_override;
    c.validate();
  }
  if (options.log_dir) std::filesystem::create_directories(*options.log_dir);

  // Scenes are shared read-only between the flights of a scenario.
  std::vector<ForestScene> scenes;
  scenes.reserve(configs.size());
  for (const auto& c : configs) scenes.push_back(generate_forest(forest_params(c)));

  struct Job {
    std::size_t scenario;
    int flight;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < configs.size(); ++s)
    for (int i = 0; i < configs[s].mission.repeats; ++i) jobs.push_back({s, i});

  BenchmarkResult result;
  result.scenarios.resize(configs.size());
  for (std::size_t s = 0; s < configs.size(); ++s) {
    result.scenarios[s].config = configs[s];
    result.scenarios[s].flights.resize(static_cast<std::size_t>(configs[s].mission.repeats));
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        const ScenarioConfig& cfg = configs[job.scenario];
        const FlightLog log = run_mission(cfg, scenes[job.scenario], job.flight);
        if (options.log_dir) {
          std::ofstream os(*options.log_dir / log_file_name(cfg, job.flight), std::ios::binary);
          log.write_jsonl(os);
          if (!os) throw std::runtime_error("failed to write flight log");
        }
        result.scenarios[job.scenario].flights[static_cast<std::size_t>(job.flight)] = compute(log);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  int n = options.jobs > 0 ? options.jobs : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, std::min<int>(n, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (auto& s : result.scenarios) s.aggregate = aggregate(s.flights);
  return result;
}

namespace {

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

std::string aggregate_csv(const BenchmarkResult& result) {
  std::ostringstream os;
  os << "scenario,variant,forest_density,complexity,v_target,success,collisions,collision_failures,leaf_dodges,"
        "leaf_failures,emergency_stops,mean_v_p2p,mean_v_true,mean_t_extra,t_extra_from_means,failures_tree,"
        "failures_leaves,failures_nan,failures_unstable\n";
  for (const auto& s : result.scenarios) {
    const auto& a = s.aggregate;
    const auto& c = s.config;
    os << c.name << ',' << to_string(c.variant) << ',' << fmt(c.forest.density, 0) << ','
       << to_string(classify_density(c.forest.density)) << ',' << fmt(c.mission.v_target, 1) << ',' << a.success_rate
       << ',' << a.collisions << ',' << a.collision_failures << ',' << a.leaf_dodges << ',' << a.leaf_failures << ','
       << a.emergency_stops << ',' << fmt(a.mean_v_p2p) << ',' << fmt(a.mean_v_true) << ',' << fmt(a.mean_t_extra, 2)
       << ',' << fmt(a.t_extra_from_means, 2) << ',' << a.failures_tree << ',' << a.failures_leaves << ','
       << a.failures_nan << ',' << a.failures_unstable << '\n';
  }
  return os.str();
}

std::string flights_csv(const BenchmarkResult& result) {
  std::ostringstream os;
  os << "scenario,flight,success,failure_cause,end_x,end_y,end_z,collisions,leaf_dodges,emergency_stops,t_true,"
        "v_p2p,v_true,t_extra\n";
  for (const auto& s : result.scenarios) {
    for (std::size_t i = 0; i < s.flights.size(); ++i) {
      const auto& m = s.flights[i];
      os << s.config.name << ',' << i + 1 << ',' << (m.success ? "yes" : "no") << ','
         << (m.failure_cause ? to_string(*m.failure_cause) : "") << ',' << fmt(m.terminal.x(), 2) << ','
         << fmt(m.terminal.y(), 2) << ',' << fmt(m.terminal.z(), 2) << ',' << m.collisions << ',' << m.leaf_dodges
         << ',' << m.emergency_stops << ',' << fmt(m.t_true, 1) << ',';
      // Speeds and t_extra are reported for successful flights only.
      if (m.success)
        os << fmt(m.v_p2p, 2) << ',' << fmt(m.v_true, 2) << ',' << fmt(m.t_extra, 1) << '\n';
      else
        os << "x,x,x\n";
    }
  }
  return os.str();
}

std::string report_json(const BenchmarkResult& result) {
  json out = json::array();
  for (const auto& s : result.scenarios) {
    const auto& a = s.aggregate;
    json flights = json::array();
    for (const auto& m : s.flights) {
      flights.push_back({{"flight_id", m.flight_id},
                         {"success", m.success},
                         {"failure_cause", m.failure_cause ? json(to_string(*m.failure_cause)) : json(nullptr)},
                         {"terminal", vec_to_json(m.terminal)},
                         {"t_true", m.t_true},
                         {"d", m.d},
                         {"path_length", m.path_length},
                         {"v_true", m.v_true},
                         {"v_p2p", m.v_p2p},
                         {"t_extra", m.t_extra},
                         {"collisions", m.collisions},
                         {"fatal_collision", m.fatal_collision},
                         {"leaf_dodges", m.leaf_dodges},
                         {"emergency_stops", m.emergency_stops},
                         {"emergency_stop_total", m.emergency_stop_total}});
    }
    out.push_back({{"scenario", s.config.name},
                   {"variant", to_string(s.config.variant)},
                   {"forest_density", s.config.forest.density},
                   {"v_target", s.config.mission.v_target},
                   {"aggregate",
                    {{"runs", a.runs},
                     {"successes", a.successes},
                     {"success_rate", a.success_rate},
                     {"mean_v_p2p", a.mean_v_p2p},
                     {"mean_v_true", a.mean_v_true},
                     {"mean_t_extra", a.mean_t_extra},
                     {"t_extra_from_means", a.t_extra_from_means},
                     {"collisions", a.collisions},
                     {"collision_failures", a.collision_failures},
                     {"leaf_dodges", a.leaf_dodges},
                     {"leaf_failures", a.leaf_failures},
                     {"emergency_stops", a.emergency_stops},
                     {"failures",
                      {{"Tree", a.failures_tree},
                       {"Leaves", a.failures_leaves},
                       {"NaN_SFC", a.failures_nan},
                       {"Unstable", a.failures_unstable}}}}},
                   {"flights", std::move(flights)}});
  }
  return out.dump(2) + "\n";
}

void write_reports(const BenchmarkResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error(std::string("failed to write ") + name);
  };
  put("aggregate.csv", aggregate_csv(result));
  put("flights.csv", flights_csv(result));
  put("report.json", report_json(result));
}

}  // namespace forestnav
