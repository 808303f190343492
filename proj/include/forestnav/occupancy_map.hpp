#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "forestnav/geometry.hpp"

namespace forestnav {

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const VoxelIndex&) const = default;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class NoFreeVoxel : public std::runtime_error {
 public:
  NoFreeVoxel() : std::runtime_error("no free voxel in map") {}
};

struct MapConfig {
  Vec3 origin = Vec3::Zero();
  double resolution = 0.1;
  std::array<int, 3> dims{1, 1, 1};
  double forgetting_threshold = 3.0;
  double inflation_radius = 0.4;
};

struct ScanStats {
  std::size_t accepted = 0;
  std::size_t dropped = 0;  // outside map bounds
};

// Dense hit-only occupancy grid with temporal forgetting.
//
// A voxel is occupied at time t iff it has been hit and t - last_hit <= forgetting_threshold.
// Alongside the raw hit times the map keeps, per voxel, the latest hit time of any voxel whose
// center lies within inflation_radius. Because hit times only ever increase, that maximum is
// never stale: a voxel is blocked at t iff t - inflated_hit <= forgetting_threshold.
class VoxelMap {
 public:
  explicit VoxelMap(const MapConfig& cfg);

  const MapConfig& config() const { return cfg_; }
  double resolution() const { return cfg_.resolution; }
  const std::array<int, 3>& dims() const { return cfg_.dims; }
  std::size_t voxel_count() const { return last_hit_.size(); }
  Vec3 upper_corner() const;

  bool in_bounds(const VoxelIndex& v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < cfg_.dims[0] && v.y < cfg_.dims[1] &&
           v.z < cfg_.dims[2];
  }
  bool contains(const Vec3& p) const { return try_world_to_voxel(p).has_value(); }

  VoxelIndex world_to_voxel(const Vec3& p) const;
  std::optional<VoxelIndex> try_world_to_voxel(const Vec3& p) const;
  Vec3 voxel_to_world(const VoxelIndex& v) const;

  // Marks every in-bounds voxel containing a point as hit at t. t must not decrease between calls.
  ScanStats integrate_scan(std::span<const Vec3> points, double t);

  std::optional<double> last_hit(const VoxelIndex& v) const;
  bool occupied(const VoxelIndex& v, double t) const;
  bool is_blocked(const VoxelIndex& v, double t) const;
  // Unchecked variant for hot loops; v must be in bounds.
  bool is_blocked_unchecked(const VoxelIndex& v, double t) const {
    return t - inflated_hit_[linear(v)] <= cfg_.forgetting_threshold;
  }
  bool is_blocked_at(const Vec3& p, double t) const;

  // Nearest unblocked voxel by center distance; ties go to the lexicographically smallest index.
  VoxelIndex nearest_free(const VoxelIndex& v, double t) const;

  std::vector<VoxelIndex> occupied_voxels(double t) const;
  std::vector<VoxelIndex> occupied_in_box(const VoxelIndex& lo, const VoxelIndex& hi, double t) const;

  std::span<const std::array<int, 3>> inflation_offsets() const { return inflation_offsets_; }

  // Debug snapshot: every voxel that has ever been hit, as (index, last_hit) rows.
  std::string dump_json() const;
  static VoxelMap load_json(const std::string& text);

  // Clears all hit information.
  void reset();

  std::size_t linear(const VoxelIndex& v) const {
    return (static_cast<std::size_t>(v.z) * cfg_.dims[1] + v.y) * cfg_.dims[0] + v.x;
  }
  VoxelIndex unlinear(std::size_t i) const;

 private:
  void mark_hit(const VoxelIndex& v, double t);

  MapConfig cfg_;
  std::vector<double> last_hit_;
  std::vector<double> inflated_hit_;
  std::vector<std::array<int, 3>> inflation_offsets_;
  struct Delta {
    std::ptrdiff_t step;  // the offset as a linear index step
    int dz;
  };
  std::vector<Delta> inflation_deltas_;
  int inflation_reach_ = 0;  // largest horizontal |offset| component
  double latest_t_;
};

}  // namespace forestnav
