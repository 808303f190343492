#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forestnav/metrics.hpp"
#include "forestnav/scenario.hpp"

namespace forestnav {

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<MissionMetrics> flights;  // in flight-index order
  BatchReport aggregate;
};

struct BenchmarkResult {
  std::vector<ScenarioReport> scenarios;  // in suite order
};

struct BenchmarkOptions {
  int jobs = 0;                                // 0 = hardware concurrency
  std::optional<std::filesystem::path> log_dir;  // FlightLogs as <scenario>_<index>.jsonl
  std::optional<int> repeats_override;
};

// Desk-scale settings the default suite runs with: 0.2 m voxels, 3000 rays per scan, a 5000-expansion
// planning slice, lidar range noise of 3 cm, occasional leaf clouds and NaN injection at 0.5 per minute.
// Everything else keeps the ScenarioConfig defaults.
ScenarioConfig bench_profile();

// {Medium 1040, Difficult 2220 trees/ha} x {1, 2 m/s} x {Original, Optimized}; other settings come
// from `base`. Scenario order: forest, then speed, then variant.
std::vector<ScenarioConfig> default_suite(const ScenarioConfig& base = bench_profile());

// Runs every flight of every scenario in a worker pool. Metrics are re-derived from each log
// through metrics::compute and reduced in suite order, so the result is independent of scheduling.
BenchmarkResult run_benchmark(std::span<const ScenarioConfig> suite, const BenchmarkOptions& options = {});

std::string aggregate_csv(const BenchmarkResult& result);
std::string flights_csv(const BenchmarkResult& result);
std::string report_json(const BenchmarkResult& result);

// Writes aggregate.csv, flights.csv and report.json into dir.
void write_reports(const BenchmarkResult& result, const std::filesystem::path& dir);

std::string log_file_name(const ScenarioConfig& cfg, int flight_index);

}  // namespace forestnav
