#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "forestnav/forest.hpp"

namespace forestnav {

struct LidarConfig {
  int rays_per_scan = 20000;     // 200k points/s at 10 Hz
  double elevation_min_deg = -7.0;
  double elevation_max_deg = 52.0;
  double range = 30.0;
  double rate_hz = 10.0;
  double ground_z = 0.0;
  double range_noise_sd = 0.0;   // Gaussian error added to each return's range (m)

  void validate() const;
};

// Rotating-prism style sensor: rays follow a 2D low-discrepancy sequence over the field of view
// that keeps advancing from scan to scan, so successive scans never repeat the same directions.
class Lidar {
 public:
  Lidar(const ForestScene& scene, LidarConfig cfg, std::uint64_t seed);

  const LidarConfig& config() const { return cfg_; }

  // Unit direction of the k-th ray of the infinite pattern.
  Vec3 ray_direction(std::uint64_t k) const;

  // Nearest capsule or ground hit along a ray, within range.
  std::optional<double> cast(const Vec3& origin, const Vec3& dir) const;

  // One full scan from `origin`. Rays are cut where they leave `clip` (when given), since the
  // consumer would discard anything beyond it. Extra points (transient returns) within range
  // and clip are appended.
  std::vector<Vec3> scan(const Vec3& origin, std::uint64_t scan_index, const std::optional<Aabb>& clip = std::nullopt,
                         std::span<const Vec3> extra = {}) const;

 private:
  SceneIndex index_;
  LidarConfig cfg_;
  std::uint64_t noise_seed_;
  double phase_az_;
  double phase_el_;
  double sin_min_;
  double sin_max_;
};

}  // namespace forestnav
