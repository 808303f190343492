#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forestnav/flight_log.hpp"

namespace forestnav {

enum class FailureCause : std::uint8_t { Tree, Leaves, NaN_SFC, Unstable };

std::string to_string(FailureCause c);

inline constexpr double kGoalTolerance = 1.0;      // arrival radius for success (m)
inline constexpr double kNoPathProximity = 3.0;    // NoPath this close to the goal still counts (m)
inline constexpr double kSmoothingWindow = 0.5;    // moving-average window on the estimate path (s)
inline constexpr double kLeafWindow = 2.0;         // leaf activity this long before failure blames leaves (s)
inline constexpr int kUnstableRun = 5;             // consecutive fallback ticks that signal unstable flight

struct MissionMetrics {
  std::string flight_id;
  bool success = false;
  std::optional<FailureCause> failure_cause;
  double t_true = 0.0;
  double d = 0.0;         // straight line, start to terminal (m)
  double v_true = 0.0;    // smoothed path length / t_true
  double v_p2p = 0.0;     // d / t_true
  double t_extra = 0.0;   // t_true - d / v_true
  double path_length = 0.0;
  Vec3 terminal = Vec3::Zero();
  int collisions = 0;
  bool fatal_collision = false;
  int leaf_dodges = 0;
  int emergency_stops = 0;
  double emergency_stop_total = 0.0;
};

// Derived speed and extra-time quantities from scalar inputs; v_true is taken as given.
MissionMetrics metrics_from_quantities(double t_true, const Vec3& start, const Vec3& terminal, double v_true);

// Symmetric moving average that keeps both endpoints fixed, window `window` seconds at spacing dt.
std::vector<Vec3> smooth_path(std::span<const Vec3> points, double dt, double window = kSmoothingWindow);

// Per-mission metrics from a complete log. `goal` overrides the goal stored in the end record.
MissionMetrics compute(const FlightLog& log, const std::optional<Vec3>& goal = std::nullopt);

// Cause of a failed mission. Throws std::logic_error on a successful log.
FailureCause classify_failure(const FlightLog& log);

struct BatchReport {
  int runs = 0;
  int successes = 0;
  std::string success_rate;          // "k/n"
  double mean_v_p2p = 0.0;           // successful runs only
  double mean_v_true = 0.0;
  double mean_t_extra = 0.0;         // mean of per-flight t_extra
  double mean_t_true = 0.0;
  double mean_d = 0.0;
  double t_extra_from_means = 0.0;   // mean_t_true - mean_d / mean_v_true
  int collisions = 0;
  int collision_failures = 0;
  int leaf_dodges = 0;
  int leaf_failures = 0;
  int emergency_stops = 0;
  int failures_tree = 0;
  int failures_leaves = 0;
  int failures_nan = 0;
  int failures_unstable = 0;
};

// Aggregate over runs; invariant under permutation of the input.
BatchReport aggregate(std::span<const MissionMetrics> runs);

}  // namespace forestnav
