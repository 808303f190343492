#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forestnav/dynamics.hpp"

namespace forestnav {

// Event type names used in logs.
namespace event {
inline constexpr const char* kLeafCloud = "leaf_cloud";          // data: lifetime, center, voxel_count
inline constexpr const char* kNaNDetected = "nan_detected";      // data: recovered
inline constexpr const char* kEmergencyStop = "emergency_stop";  // data: reason
inline constexpr const char* kMotorsOff = "motors_off";
inline constexpr const char* kUnstableFlight = "unstable_flight";
inline constexpr const char* kCollision = "collision";          // data: severity, ground, tree, branch
inline constexpr const char* kBudgetExceeded = "budget_exceeded";
inline constexpr const char* kNoPath = "no_path";
inline constexpr const char* kStartMoved = "start_moved";        // data: from, to
inline constexpr const char* kGoalRepositioned = "goal_repositioned";
inline constexpr const char* kPlanFailed = "plan_failed";        // data: reason
}  // namespace event

// End-of-mission reasons.
namespace end_reason {
inline constexpr const char* kGoalReached = "goal_reached";
inline constexpr const char* kNoPath = "no_path";                // planner gave up near the goal
inline constexpr const char* kFatalCollision = "fatal_collision";
inline constexpr const char* kMotorsOff = "motors_off";
inline constexpr const char* kTimeout = "timeout";
inline constexpr const char* kStuck = "stuck";                   // persistent NoPath far from the goal
}  // namespace end_reason

struct LogEvent {
  std::string type;
  double t = 0.0;
  nlohmann::json data = nlohmann::json::object();
};

struct CommandRecord {
  Vec3 jerk = Vec3::Zero();
  std::string source;          // solved | fallback_replay | emergency_stop | motors_off
  int replay_age = 0;
  std::string solver_status;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct TickRecord {
  double t = 0.0;
  DroneState truth;
  DroneState estimate;
  CommandRecord command;
  std::string plan_status;     // path | budget_exceeded | no_path | reused | skipped
  std::uint64_t expansions = 0;
  nlohmann::json geometry;     // optional path / corridor rows, null when not recorded
  std::vector<LogEvent> events;
};

struct EndRecord {
  double t = 0.0;
  std::string reason;
  Vec3 terminal_truth = Vec3::Zero();
  Vec3 terminal_estimate = Vec3::Zero();
  Vec3 goal = Vec3::Zero();    // final (possibly repositioned) goal, estimate frame
};

struct FlightLog {
  nlohmann::json header = nlohmann::json::object();
  std::vector<TickRecord> ticks;
  std::optional<EndRecord> end;

  double control_dt() const { return header.value("control_dt", 0.1); }
  double j_max() const { return header.value("j_max", 50.0); }

  std::vector<LogEvent> events() const;  // all tick events in time order

  void write_jsonl(std::ostream& os) const;
  std::string to_jsonl() const;
  static FlightLog read_jsonl(std::istream& is);
  static FlightLog parse_jsonl(const std::string& text);
};

nlohmann::json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const nlohmann::json& j);

}  // namespace forestnav
