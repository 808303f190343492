#include "forestnav/occupancy_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace forestnav {
namespace {

constexpr double kNever = -std::numeric_limits<double>::infinity();

std::vector<std::array<int, 3>> ball_offsets(double radius_cells) {
  std::vector<std::array<int, 3>> out;
  const int r = static_cast<int>(std::floor(radius_cells + 1e-9));
  const double limit = radius_cells * radius_cells + 1e-9;
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (dx * dx + dy * dy + dz * dz <= limit) out.push_back({dx, dy, dz});
  return out;
}

}  // namespace

VoxelMap::VoxelMap(const MapConfig& cfg) : cfg_(cfg), latest_t_(kNever) {
  if (!(cfg_.resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
  for (int d : cfg_.dims)
    if (d < 1) throw std::invalid_argument("map dims must be >= 1");
  if (!(cfg_.inflation_radius >= 0.0)) throw std::invalid_argument("inflation radius must be >= 0");
  if (!(cfg_.forgetting_threshold >= 0.0)) throw std::invalid_argument("forgetting threshold must be >= 0");
  const std::size_t n = static_cast<std::size_t>(cfg_.dims[0]) * cfg_.dims[1] * cfg_.dims[2];
  last_hit_.assign(n, kNever);
  inflated_hit_.assign(n, kNever);
  inflation_offsets_ = ball_offsets(cfg_.inflation_radius / cfg_.resolution);
  const std::ptrdiff_t sy = cfg_.dims[0], sz = static_cast<std::ptrdiff_t>(cfg_.dims[0]) * cfg_.dims[1];
  for (const auto& o : inflation_offsets_) {
    inflation_deltas_.push_back({o[2] * sz + o[1] * sy + o[0], o[2]});
    inflation_reach_ = std::max({inflation_reach_, std::abs(o[0]), std::abs(o[1])});
  }
}

Vec3 VoxelMap::upper_corner() const {
  return cfg_.origin + cfg_.resolution * Vec3(cfg_.dims[0], cfg_.dims[1], cfg_.dims[2]);
}

std::optional<VoxelIndex> VoxelMap::try_world_to_voxel(const Vec3& p) const {
  if (!p.allFinite()) return std::nullopt;
  const Vec3 rel = (p - cfg_.origin) / cfg_.resolution;
  const VoxelIndex v{static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
                     static_cast<int>(std::floor(rel.z()))};
  // guard against int overflow from far-away points before trusting the cast
  if (rel.x() < 0 || rel.y() < 0 || rel.z() < 0 || rel.x() >= cfg_.dims[0] || rel.y() >= cfg_.dims[1] ||
      rel.z() >= cfg_.dims[2])
    return std::nullopt;
  return v;
}

VoxelIndex VoxelMap::world_to_voxel(const Vec3& p) const {
  auto v = try_world_to_voxel(p);
  if (!v) throw OutOfBounds("position outside map bounds");
  return *v;
}

Vec3 VoxelMap::voxel_to_world(const VoxelIndex& v) const {
  return cfg_.origin + cfg_.resolution * Vec3(v.x + 0.5, v.y + 0.5, v.z + 0.5);
}

VoxelIndex VoxelMap::unlinear(std::size_t i) const {
  const auto nx = static_cast<std::size_t>(cfg_.dims[0]);
  const auto ny = static_cast<std::size_t>(cfg_.dims[1]);
  return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
}

void VoxelMap::mark_hit(const VoxelIndex& v, double t) {
  const std::size_t i = linear(v);
  if (last_hit_[i] == t) return;  // already propagated this timestamp
  last_hit_[i] = t;
  const int r = inflation_reach_;
  // Away from the x/y walls only the vertical range needs checking per offset.
  if (v.x >= r && v.x + r < cfg_.dims[0] && v.y >= r && v.y + r < cfg_.dims[1]) {
    double* base = inflated_hit_.data() + i;
    for (const Delta& d : inflation_deltas_) {
      const int z = v.z + d.dz;
      if (z < 0 || z >= cfg_.dims[2]) continue;
      base[d.step] = std::max(base[d.step], t);
    }
    return;
  }
  for (const auto& o : inflation_offsets_) {
    const VoxelIndex n{v.x + o[0], v.y + o[1], v.z + o[2]};
    if (!in_bounds(n)) continue;
    double& slot = inflated_hit_[linear(n)];
    slot = std::max(slot, t);
  }
}

ScanStats VoxelMap::integrate_scan(std::span<const Vec3> points, double t) {
  if (t < latest_t_) throw std::invalid_argument("scan timestamps must be non-decreasing");
  latest_t_ = t;
  ScanStats stats;
  for (const Vec3& p : points) {
    if (auto v = try_world_to_voxel(p)) {
      mark_hit(*v, t);
      ++stats.accepted;
    } else {
      ++stats.dropped;
    }
  }
  return stats;
}

std::optional<double> VoxelMap::last_hit(const VoxelIndex& v) const {
  if (!in_bounds(v)) throw OutOfBounds("voxel index outside map");
  const double h = last_hit_[linear(v)];
  if (h == kNever) return std::nullopt;
  return h;
}

bool VoxelMap::occupied(const VoxelIndex& v, double t) const {
  if (!in_bounds(v)) throw OutOfBounds("voxel index outside map");
  return t - last_hit_[linear(v)] <= cfg_.forgetting_threshold;
}

bool VoxelMap::is_blocked(const VoxelIndex& v, double t) const {
  if (!in_bounds(v)) throw OutOfBounds("voxel index outside map");
  return is_blocked_unchecked(v, t);
}

bool VoxelMap::is_blocked_at(const Vec3& p, double t) const { return is_blocked(world_to_voxel(p), t); }

VoxelIndex VoxelMap::nearest_free(const VoxelIndex& v, double t) const {
  if (!in_bounds(v)) throw OutOfBounds("voxel index outside map");
  if (!is_blocked_unchecked(v, t)) return v;

  // Search balls of growing radius. Within a ball every voxel closer than the radius is
  // enumerated, so the first ball containing a free voxel yields the global argmin.
  const int max_dim = std::max({cfg_.dims[0], cfg_.dims[1], cfg_.dims[2]});
  for (int r = 4; r < 2 * max_dim; r *= 2) {
    if (r > 48) break;  // larger balls are cheaper as a full scan
    const long limit = static_cast<long>(r) * r;
    bool found = false;
    long best_d = 0;
    VoxelIndex best{};
    for (int dx = -r; dx <= r; ++dx)
      for (int dy = -r; dy <= r; ++dy)
        for (int dz = -r; dz <= r; ++dz) {
          const long d = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy + static_cast<long>(dz) * dz;
          if (d > limit) continue;
          const VoxelIndex n{v.x + dx, v.y + dy, v.z + dz};
          if (!in_bounds(n) || is_blocked_unchecked(n, t)) continue;
          if (!found || d < best_d || (d == best_d && n < best)) {
            found = true;
            best_d = d;
            best = n;
          }
        }
    if (found) return best;
  }

  bool found = false;
  long best_d = 0;
  VoxelIndex best{};
  for (int x = 0; x < cfg_.dims[0]; ++x)
    for (int y = 0; y < cfg_.dims[1]; ++y)
      for (int z = 0; z < cfg_.dims[2]; ++z) {
        const VoxelIndex n{x, y, z};
        if (is_blocked_unchecked(n, t)) continue;
        const long dx = x - v.x, dy = y - v.y, dz = z - v.z;
        const long d = dx * dx + dy * dy + dz * dz;
        if (!found || d < best_d || (d == best_d && n < best)) {
          found = true;
          best_d = d;
          best = n;
        }
      }
  if (!found) throw NoFreeVoxel();
  return best;
}

std::vector<VoxelIndex> VoxelMap::occupied_voxels(double t) const {
  std::vector<VoxelIndex> out;
  for (std::size_t i = 0; i < last_hit_.size(); ++i)
    if (t - last_hit_[i] <= cfg_.forgetting_threshold) out.push_back(unlinear(i));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VoxelIndex> VoxelMap::occupied_in_box(const VoxelIndex& lo, const VoxelIndex& hi, double t) const {
  std::vector<VoxelIndex> out;
  const int x0 = std::max(lo.x, 0), y0 = std::max(lo.y, 0), z0 = std::max(lo.z, 0);
  const int x1 = std::min(hi.x, cfg_.dims[0] - 1), y1 = std::min(hi.y, cfg_.dims[1] - 1),
            z1 = std::min(hi.z, cfg_.dims[2] - 1);
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y) {
      const double* row = last_hit_.data() + linear(VoxelIndex{0, y, z});
      for (int x = x0; x <= x1; ++x)
        if (t - row[x] <= cfg_.forgetting_threshold) out.push_back(VoxelIndex{x, y, z});
    }
  return out;
}

void VoxelMap::reset() {
  std::fill(last_hit_.begin(), last_hit_.end(), kNever);
  std::fill(inflated_hit_.begin(), inflated_hit_.end(), kNever);
  latest_t_ = kNever;
}

std::string VoxelMap::dump_json() const {
  nlohmann::json j;
  j["origin"] = {cfg_.origin.x(), cfg_.origin.y(), cfg_.origin.z()};
  j["resolution"] = cfg_.resolution;
  j["dims"] = cfg_.dims;
  j["forgetting_threshold"] = cfg_.forgetting_threshold;
  j["inflation_radius"] = cfg_.inflation_radius;
  auto& voxels = j["voxels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < last_hit_.size(); ++i) {
    if (last_hit_[i] == kNever) continue;
    const VoxelIndex v = unlinear(i);
    voxels.push_back({v.x, v.y, v.z, last_hit_[i]});
  }
  return j.dump();
}

VoxelMap VoxelMap::load_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MapConfig cfg;
  cfg.origin = Vec3(j["origin"][0], j["origin"][1], j["origin"][2]);
  cfg.resolution = j["resolution"];
  cfg.dims = j["dims"].get<std::array<int, 3>>();
  cfg.forgetting_threshold = j["forgetting_threshold"];
  cfg.inflation_radius = j["inflation_radius"];
  VoxelMap map(cfg);
  // replay in timestamp order so the inflation layer is rebuilt exactly
  std::vector<std::pair<double, VoxelIndex>> rows;
  for (const auto& row : j["voxels"])
    rows.emplace_back(row[3].get<double>(), VoxelIndex{row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [t, v] : rows) {
    if (!map.in_bounds(v)) throw OutOfBounds("snapshot voxel outside map");
    map.mark_hit(v, t);
    map.latest_t_ = t;
  }
  return map;
}

}  // namespace forestnav
