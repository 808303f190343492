#include "forestnav/lidar.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "forestnav/rng.hpp"

namespace forestnav {

void LidarConfig::validate() const {
  if (rays_per_scan < 1) throw std::invalid_argument("lidar needs at least one ray per scan");
  if (!(elevation_min_deg < elevation_max_deg) || elevation_min_deg < -90.0 || elevation_max_deg > 90.0)
    throw std::invalid_argument("invalid lidar elevation band");
  if (!(range > 0.0) || !(rate_hz > 0.0)) throw std::invalid_argument("lidar range and rate must be positive");
  if (!(range_noise_sd >= 0.0)) throw std::invalid_argument("lidar range noise must be >= 0");
}

namespace {

// Plastic number; (1/g, 1/g^2) is the R2 additive recurrence.
constexpr double kPlastic = 1.32471795724474602596;
constexpr double kA1 = 1.0 / kPlastic;
constexpr double kA2 = 1.0 / (kPlastic * kPlastic);

double frac(double x) { return x - std::floor(x); }

}  // namespace

Lidar::Lidar(const ForestScene& scene, LidarConfig cfg, std::uint64_t seed) : index_(scene), cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(seed ^ 0x6c69646172ULL));
  noise_seed_ = mix_seed(seed ^ 0x6e6f697365ULL);
  phase_az_ = rng.uniform();
  phase_el_ = rng.uniform();
  constexpr double deg = std::numbers::pi / 180.0;
  sin_min_ = std::sin(cfg_.elevation_min_deg * deg);
  sin_max_ = std::sin(cfg_.elevation_max_deg * deg);
}

Vec3 Lidar::ray_direction(std::uint64_t k) const {
  const double kd = static_cast<double>(k);
  const double az = 2.0 * std::numbers::pi * frac(phase_az_ + kA1 * kd);
  // Uniform in sin(elevation) gives uniform density over the spherical band.
  const double s = sin_min_ + (sin_max_ - sin_min_) * frac(phase_el_ + kA2 * kd);
  const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
  return Vec3(c * std::cos(az), c * std::sin(az), s);
}

std::optional<double> Lidar::cast(const Vec3& origin, const Vec3& dir) const {
  double t_max = cfg_.range;
  std::optional<double> hit;
  if (dir.z() < 0.0) {
    const double tg = (cfg_.ground_z - origin.z()) / dir.z();
    if (tg >= 0.0 && tg <= t_max) {
      hit = tg;
      t_max = tg;
    }
  }
  if (auto t = index_.raycast(origin, dir, t_max)) hit = *t;
  return hit;
}

std::vector<Vec3> Lidar::scan(const Vec3& origin, std::uint64_t scan_index, const std::optional<Aabb>& clip,
                              std::span<const Vec3> extra) const {
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(cfg_.rays_per_scan) + extra.size());
  const std::uint64_t base = scan_index * static_cast<std::uint64_t>(cfg_.rays_per_scan);
  // Each scan draws its range errors from its own stream, so scans stay independent of call order.
  Rng noise(mix_seed(noise_seed_ + scan_index));
  for (int i = 0; i < cfg_.rays_per_scan; ++i) {
    const Vec3 dir = ray_direction(base + static_cast<std::uint64_t>(i));
    double limit = cfg_.range;
    if (clip) {
      // Exit parameter of the clip box; origin is normally inside it.
      for (int a = 0; a < 3; ++a) {
        if (dir[a] > 0.0) limit = std::min(limit, (clip->hi[a] - origin[a]) / dir[a]);
        else if (dir[a] < 0.0) limit = std::min(limit, (clip->lo[a] - origin[a]) / dir[a]);
      }
      if (limit < 0.0) continue;
    }
    std::optional<double> t;
    if (dir.z() < 0.0) {
      const double tg = (cfg_.ground_z - origin.z()) / dir.z();
      if (tg >= 0.0 && tg <= cfg_.range) t = tg;
    }
    const double search = std::min(limit, t.value_or(std::numeric_limits<double>::infinity()));
    if (auto tc = index_.raycast(origin, dir, std::min(search, cfg_.range))) t = *tc;
    if (!t) continue;
    double r = *t;
    if (cfg_.range_noise_sd > 0.0) r = std::max(0.0, r + noise.normal(0.0, cfg_.range_noise_sd));
    if (r <= limit) points.push_back(origin + dir * r);
  }
  for (const Vec3& p : extra) {
    if ((p - origin).norm() > cfg_.range) continue;
    if (clip && !clip->contains(p)) continue;
    points.push_back(p);
  }
  return points;
}

}  // namespace forestnav
