#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "forestnav/dynamics.hpp"
#include "forestnav/forest.hpp"
#include "forestnav/rng.hpp"

namespace forestnav {

// Same propagation as the MPC prediction model.
inline DroneState step_dynamics(const DroneState& s, const Vec3& jerk, double dt) { return propagate(s, jerk, dt); }

enum class Severity : std::uint8_t { Minor, Fatal };

struct Contact {
  Severity severity = Severity::Minor;
  bool ground = false;
  int tree = -1;
  int branch = -1;  // -1 for trunk or ground
};

// Brute force over every capsule plus the ground plane z = ground_z. Trunk or ground contact is
// Fatal and wins over branch contact.
std::optional<Contact> check_collision(const Vec3& p, const ForestScene& scene, double drone_radius,
                                       double ground_z = 0.0);
// Same result through the bucket index.
std::optional<Contact> check_collision(const Vec3& p, const SceneIndex& index, double drone_radius,
                                       double ground_z = 0.0);

// Normalized mean of exactly 200 accelerometer samples. Throws std::invalid_argument otherwise or
// when the mean vanishes.
inline constexpr std::size_t kGravitySamples = 200;
Vec3 gravity_init(std::span<const Vec3> samples);

// Accelerometer readings at rest for a body rotated by `body_from_world`, with isotropic noise.
std::vector<Vec3> sample_accelerometer(const Eigen::Matrix3d& body_from_world, double noise_sd, std::size_t n,
                                       Rng& rng);

// Smallest rotation taking `gravity_dir` onto (0, 0, -1).
Eigen::Matrix3d level_rotation(const Vec3& gravity_dir);

enum class LeafProfile : std::uint8_t { None, Rarely, Occasionally, Often };

std::string to_string(LeafProfile p);
LeafProfile leaf_profile_from_string(const std::string& s);
double leaf_rate_per_minute(LeafProfile p);

struct LeafCloudEvent {
  double trigger_time = 0.0;
  Vec3 offset = Vec3::Zero();  // center relative to the drone at trigger, |offset| <= 1.5 m
  int voxel_count = 0;
  double lifetime = 1.0;
  std::uint64_t seed = 0;      // drives the point layout once the event is placed

  bool active(double t) const { return t >= trigger_time && t < trigger_time + lifetime; }
};

inline constexpr double kLeafAttachRadius = 1.5;

std::vector<LeafCloudEvent> spawn_leaf_events(LeafProfile profile, std::uint64_t seed, double duration,
                                              double lifetime = 1.0);

// Transient returns of a placed cloud: voxel_count points in a 0.5 m ball around the center.
std::vector<Vec3> leaf_cloud_points(const LeafCloudEvent& event, const Vec3& center);

// Poisson arrival times with the given rate over [0, duration).
std::vector<double> poisson_schedule(double rate_per_second, double duration, Rng& rng);

struct OdometryConfig {
  double position_noise_sd = 0.0;  // white noise per reading (m)
  double drift_sd = 0.0;           // random-walk intensity (m / sqrt(s))
  double drift_bound = 1.0;        // per-axis clamp on accumulated drift (m)
};

// Rigid map from the world frame into the frame the flight stack estimates in. The transform
// pivots about `anchor`, which maps to itself.
struct EstimateFrame {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // estimate_from_world
  Vec3 anchor = Vec3::Zero();

  Vec3 point_to_estimate(const Vec3& p) const { return anchor + R * (p - anchor); }
  Vec3 point_to_world(const Vec3& p) const { return anchor + R.transpose() * (p - anchor); }
  Vec3 vector_to_estimate(const Vec3& v) const { return R * v; }
  Vec3 vector_to_world(const Vec3& v) const { return R.transpose() * v; }
};

// Truth plus optional white noise and bounded random-walk drift, expressed in an estimate frame.
class Odometry {
 public:
  Odometry(OdometryConfig cfg, std::uint64_t seed, EstimateFrame frame = {});

  DroneState estimate(const DroneState& truth, double t);
  const Vec3& drift() const { return drift_; }
  const EstimateFrame& frame() const { return frame_; }

 private:
  OdometryConfig cfg_;
  Rng rng_;
  EstimateFrame frame_;
  Vec3 drift_ = Vec3::Zero();
  std::optional<double> last_t_;
};

struct SimState {
  DroneState truth;
  double t = 0.0;
  bool collided = false;      // in contact right now
  int collision_count = 0;    // contact events (rising edges)
};

}  // namespace forestnav
