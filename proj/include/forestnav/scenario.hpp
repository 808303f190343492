#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "forestnav/corridor.hpp"
#include "forestnav/forest.hpp"
#include "forestnav/lidar.hpp"
#include "forestnav/mpc.hpp"
#include "forestnav/occupancy_map.hpp"
#include "forestnav/planner.hpp"
#include "forestnav/qp_solver.hpp"
#include "forestnav/sim_world.hpp"

namespace forestnav {

enum class Variant : std::uint8_t { Original, Optimized };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// The only behavioural differences between the two stacks.
struct VariantSwitches {
  bool path_following = true;    // path-following heuristic with the open-set restriction
  bool resumable_search = true;  // budget overrun pauses the search and stops the drone
  bool nan_recovery = true;      // non-finite corridor triggers an emergency stop
  bool gravity_init = true;
  double forgetting_threshold = 3.0;

  bool operator==(const VariantSwitches&) const = default;
};

VariantSwitches switches_for(Variant v);

struct ForestSection {
  double density = 1040.0;
  BranchLevel branch_level = BranchLevel::Medium;
  Aabb bounds{Vec3(-5.0, -15.0, 0.0), Vec3(65.0, 15.0, 3.2)};
  std::uint64_t seed = 1;
  double clearing_radius = 1.5;
};

struct MissionSection {
  Vec3 start = Vec3(0.0, 0.0, 1.0);
  double start_yaw_deg = 0.0;
  Vec3 goal_offset = Vec3(60.0, 0.0, 0.0);  // in the start heading frame
  double v_target = 1.0;
  int repeats = 15;
  double heading_jitter_deg = 3.0;          // uniform +/- per flight
  double timeout = 300.0;
  double goal_reached_radius = 0.5;
  double start_tilt_deg = 0.0;              // nose-up pitch of the airframe at start
  double stuck_timeout = 10.0;              // NoPath far from the goal for this long ends the flight
};

struct NanInjection {
  double rate_per_minute = 0.0;
  double window = 0.5;                      // seconds of non-finite corridors per event
  std::vector<double> fixed_times;          // extra deterministic windows
};

struct SimSection {
  double sim_dt = 0.01;
  double control_dt = 0.1;
  double drone_radius = 0.3;
  double imu_noise_sd = 0.1;
  double leaf_lifetime = 1.0;
  std::uint64_t planner_budget = 20000;     // node expansions per control tick
  int replan_interval = 1;                  // control ticks between replans
  double map_floor = 0.4;                   // map bottom above ground (m)
  double map_top = 3.4;                     // map ceiling above ground (m)
  bool log_geometry = true;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Variant variant = Variant::Optimized;
  ForestSection forest;
  MissionSection mission;
  LeafProfile leaf_profile = LeafProfile::None;
  NanInjection nan;
  OdometryConfig odometry;
  SimSection sim;
  LidarConfig lidar;
  double map_resolution = 0.1;
  double inflation_radius = 0.4;
  std::optional<double> forgetting_override;  // replaces the variant's threshold when set
  HeuristicParams planner;
  CorridorConfig corridor;
  mpc::MpcParams mpc;
  qp::Settings solver;

  // Throws std::invalid_argument with a descriptive message.
  void validate() const;

  VariantSwitches switches() const;
  Vec3 nominal_goal() const;  // goal without heading jitter
  MapConfig map_config() const;

  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig parse(const std::string& text);
};

ForestParams forest_params(const ScenarioConfig& cfg);

}  // namespace forestnav
