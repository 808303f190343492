#include "forestnav/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace forestnav {

namespace {

void consider(std::optional<Contact>& best, const Contact& c) {
  if (!best || (best->severity == Severity::Minor && c.severity == Severity::Fatal)) best = c;
}

}  // namespace

std::optional<Contact> check_collision(const Vec3& p, const ForestScene& scene, double drone_radius, double ground_z) {
  if (!(drone_radius > 0.0)) throw std::invalid_argument("drone radius must be positive");
  std::optional<Contact> best;
  if (p.z() - drone_radius <= ground_z) best = Contact{Severity::Fatal, true, -1, -1};
  for (std::size_t i = 0; i < scene.trees.size() && !(best && best->severity == Severity::Fatal); ++i) {
    const Tree& t = scene.trees[i];
    if (capsule_distance(p, t.trunk) < drone_radius)
      consider(best, Contact{Severity::Fatal, false, static_cast<int>(i), -1});
    for (std::size_t b = 0; b < t.branches.size(); ++b)
      if (capsule_distance(p, t.branches[b]) < drone_radius)
        consider(best, Contact{Severity::Minor, false, static_cast<int>(i), static_cast<int>(b)});
  }
  return best;
}

std::optional<Contact> check_collision(const Vec3& p, const SceneIndex& index, double drone_radius, double ground_z) {
  if (!(drone_radius > 0.0)) throw std::invalid_argument("drone radius must be positive");
  std::optional<Contact> best;
  if (p.z() - drone_radius <= ground_z) best = Contact{Severity::Fatal, true, -1, -1};
  // Buckets are visited in a fixed order, so the reported contact is deterministic. Among Minor
  // contacts the brute-force scan reports the lowest (tree, branch); keep that convention.
  index.for_each_near(p, drone_radius, [&](const SceneIndex::Ref& r) {
    if (capsule_distance(p, index.capsule(r)) >= drone_radius) return;
    const Contact c{r.branch < 0 ? Severity::Fatal : Severity::Minor, false, static_cast<int>(r.tree), r.branch};
    if (!best) {
      best = c;
      return;
    }
    if (best->severity != c.severity) {
      if (c.severity == Severity::Fatal) best = c;
      return;
    }
    if (best->ground) return;
    if (std::pair(c.tree, c.branch) < std::pair(best->tree, best->branch)) best = c;
  });
  return best;
}

Vec3 gravity_init(std::span<const Vec3> samples) {
  if (samples.size() != kGravitySamples) throw std::invalid_argument("gravity_init needs exactly 200 samples");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& s : samples) {
    if (!s.allFinite()) throw std::invalid_argument("non-finite accelerometer sample");
    sum += s;
  }
  const Vec3 mean = sum / static_cast<double>(samples.size());
  if (mean.norm() < 1e-9) throw std::invalid_argument("accelerometer samples average to zero");
  return mean.normalized();
}

std::vector<Vec3> sample_accelerometer(const Eigen::Matrix3d& body_from_world, double noise_sd, std::size_t n,
                                       Rng& rng) {
  // The readings are of the gravity vector itself, matching the sign convention that a level
  // body reports (0, 0, -9.81).
  const Vec3 g = body_from_world * Vec3(0.0, 0.0, -9.81);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal(0.0, noise_sd);
    const double y = rng.normal(0.0, noise_sd);
    const double z = rng.normal(0.0, noise_sd);
    out.push_back(g + Vec3(x, y, z));
  }
  return out;
}

Eigen::Matrix3d level_rotation(const Vec3& gravity_dir) {
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(gravity_dir.normalized(), Vec3(0.0, 0.0, -1.0));
  return q.toRotationMatrix();
}

std::string to_string(LeafProfile p) {
  switch (p) {
    case LeafProfile::None: return "none";
    case LeafProfile::Rarely: return "rarely";
    case LeafProfile::Occasionally: return "occasionally";
    case LeafProfile::Often: return "often";
  }
  return "none";
}

LeafProfile leaf_profile_from_string(const std::string& s) {
  if (s == "none") return LeafProfile::None;
  if (s == "rarely") return LeafProfile::Rarely;
  if (s == "occasionally") return LeafProfile::Occasionally;
  if (s == "often") return LeafProfile::Often;
  throw std::invalid_argument("unknown leaf profile: " + s);
}

double leaf_rate_per_minute(LeafProfile p) {
  switch (p) {
    case LeafProfile::None: return 0.0;
    case LeafProfile::Rarely: return 0.5;
    case LeafProfile::Occasionally: return 2.0;
    case LeafProfile::Often: return 6.0;
  }
  return 0.0;
}

std::vector<double> poisson_schedule(double rate_per_second, double duration, Rng& rng) {
  std::vector<double> times;
  if (!(rate_per_second > 0.0) || !(duration > 0.0)) return times;
  double t = rng.exponential(rate_per_second);
  while (t < duration) {
    times.push_back(t);
    t += rng.exponential(rate_per_second);
  }
  return times;
}

std::vector<LeafCloudEvent> spawn_leaf_events(LeafProfile profile, std::uint64_t seed, double duration,
                                              double lifetime) {
  if (!(lifetime > 0.0)) throw std::invalid_argument("leaf cloud lifetime must be positive");
  Rng rng(mix_seed(seed ^ 0x6c65617665ULL));
  std::vector<LeafCloudEvent> events;
  for (double t : poisson_schedule(leaf_rate_per_minute(profile) / 60.0, duration, rng)) {
    LeafCloudEvent e;
    e.trigger_time = t;
    e.lifetime = lifetime;
    // Leaves are thrown up from below and beside the airframe.
    const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = rng.uniform(0.0, 1.0);
    e.offset = Vec3(rho * std::cos(az), rho * std::sin(az), rng.uniform(-1.0, 0.3));
    if (e.offset.norm() > kLeafAttachRadius) e.offset *= kLeafAttachRadius / e.offset.norm();
    e.voxel_count = static_cast<int>(rng.uniform_int(20, 60));
    e.seed = rng.next_u64();
    events.push_back(e);
  }
  return events;
}

std::vector<Vec3> leaf_cloud_points(const LeafCloudEvent& event, const Vec3& center) {
  Rng rng(event.seed);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(event.voxel_count));
  while (static_cast<int>(pts.size()) < event.voxel_count) {
    const Vec3 d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    if (d.squaredNorm() > 1.0) continue;
    pts.push_back(center + 0.5 * d);
  }
  return pts;
}

Odometry::Odometry(OdometryConfig cfg, std::uint64_t seed, EstimateFrame frame)
    : cfg_(cfg), rng_(mix_seed(seed ^ 0x6f646f6dULL)), frame_(frame) {
  if (cfg_.position_noise_sd < 0.0 || cfg_.drift_sd < 0.0 || cfg_.drift_bound < 0.0)
    throw std::invalid_argument("odometry noise parameters must be non-negative");
}

DroneState Odometry::estimate(const DroneState& truth, double t) {
  if (cfg_.drift_sd > 0.0 && last_t_ && t > *last_t_) {
    const double s = cfg_.drift_sd * std::sqrt(t - *last_t_);
    for (int i = 0; i < 3; ++i)
      drift_[i] = std::clamp(drift_[i] + rng_.normal(0.0, s), -cfg_.drift_bound, cfg_.drift_bound);
  }
  last_t_ = t;
  DroneState est;
  est.p = frame_.point_to_estimate(truth.p) + drift_;
  est.v = frame_.vector_to_estimate(truth.v);
  est.a = frame_.vector_to_estimate(truth.a);
  if (cfg_.position_noise_sd > 0.0)
    for (int i = 0; i < 3; ++i) est.p[i] += rng_.normal(0.0, cfg_.position_noise_sd);
  return est;
}

}  // namespace forestnav
