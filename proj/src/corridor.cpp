#include "forestnav/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace forestnav {

void validate_planes(const std::vector<Hyperplane>& planes) {
  for (const auto& h : planes)
    if (!h.normal.allFinite() || !std::isfinite(h.offset)) throw NaNDetected();
}

Polyhedron::Polyhedron(std::vector<Hyperplane> planes) : planes_(std::move(planes)) {
  validate_planes(planes_);
  for (const auto& h : planes_)
    if (std::abs(h.normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("hyperplane normal must be unit length");
}

double Polyhedron::max_violation(const Vec3& p) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& h : planes_) worst = std::max(worst, h.signed_value(p));
  return worst;
}

Polyhedron default_bbox(const Vec3& center, double half_extent) {
  if (!(half_extent > 0.0)) throw std::invalid_argument("half extent must be positive");
  std::vector<Hyperplane> planes;
  for (int i = 0; i < 3; ++i) {
    const Vec3 e = Vec3::Unit(i);
    planes.push_back({e, center[i] + half_extent});
    planes.push_back({-e, -(center[i] - half_extent)});
  }
  return Polyhedron(std::move(planes));
}

namespace {

// Orthonormal frame whose first axis follows the segment; the second axis is horizontal
// unless the segment is vertical.
Eigen::Matrix3d segment_frame(const Vec3& dir) {
  Vec3 e2;
  if (std::abs(dir.z()) < 0.999) {
    e2 = Vec3::UnitZ().cross(dir).normalized();
  } else {
    e2 = Vec3::UnitX();
  }
  const Vec3 e3 = dir.cross(e2).normalized();
  Eigen::Matrix3d r;
  r.col(0) = dir;
  r.col(1) = e2;
  r.col(2) = e3;
  return r;
}

}  // namespace

Polyhedron grow_segment_box(const VoxelMap& map, const Vec3& a, const Vec3& b, double t, const CorridorConfig& cfg,
                            std::vector<double>* applied_shrink) {
  const Vec3 d = b - a;
  const double len = d.norm();
  if (!(len > 0.0)) throw DegenerateSegment();
  const Eigen::Matrix3d frame = segment_frame(d / len);

  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{len, 0.0, 0.0};
  const std::array<double, 3> seed_lo = lo;
  const std::array<double, 3> seed_hi = hi;

  // Occupied voxel centers that could end up inside the fully grown box.
  const double reach = cfg.max_growth + map.resolution();
  Vec3 wlo = (a.cwiseMin(b).array() - reach).matrix();
  Vec3 whi = (a.cwiseMax(b).array() + reach).matrix();
  const Vec3 map_lo = map.config().origin;
  const Vec3 map_hi = map.upper_corner();
  wlo = wlo.cwiseMax(map_lo);
  whi = whi.cwiseMin(map_hi - Vec3::Constant(1e-9));
  std::vector<Vec3> pts;
  if ((wlo.array() <= whi.array()).all()) {
    const VoxelIndex vlo = map.world_to_voxel(wlo);
    const VoxelIndex vhi = map.world_to_voxel(whi);
    for (const auto& v : map.occupied_in_box(vlo, vhi, t)) pts.push_back(frame.transpose() * (map.voxel_to_world(v) - a));
  }

  auto corner = [&](int ix, int iy, int iz) {
    return Vec3(a + frame.col(0) * (ix ? hi[0] : lo[0]) + frame.col(1) * (iy ? hi[1] : lo[1]) +
                frame.col(2) * (iz ? hi[2] : lo[2]));
  };

  // Largest advance of a face before one of its corners leaves the map.
  auto bound_limit = [&](int axis, int sign) {
    double limit = std::numeric_limits<double>::infinity();
    const Vec3 dir = sign * frame.col(axis);
    for (int c = 0; c < 8; ++c) {
      std::array<int, 3> bits{c & 1, (c >> 1) & 1, (c >> 2) & 1};
      if (bits[axis] != (sign > 0 ? 1 : 0)) continue;
      const Vec3 p = corner(bits[0], bits[1], bits[2]);
      for (int j = 0; j < 3; ++j) {
        if (dir[j] > 1e-12) limit = std::min(limit, (map_hi[j] - p[j]) / dir[j]);
        if (dir[j] < -1e-12) limit = std::min(limit, (map_lo[j] - p[j]) / dir[j]);
      }
    }
    return std::max(limit, 0.0);
  };

  constexpr double kLateralTol = 1e-9;
  constexpr double kClearance = 1e-6;
  std::array<bool, 6> done{};
  const double step = map.resolution();
  while (!std::all_of(done.begin(), done.end(), [](bool x) { return x; })) {
    for (int k = 0; k < 6; ++k) {
      if (done[k]) continue;
      const int axis = k / 2;
      const int sign = (k % 2 == 0) ? 1 : -1;
      const double face = sign > 0 ? hi[axis] : lo[axis];
      const double grown = sign > 0 ? hi[axis] - seed_hi[axis] : seed_lo[axis] - lo[axis];
      const double remaining = cfg.max_growth - grown;
      const double by_bounds = bound_limit(axis, sign);
      double advance = std::min({step, remaining, by_bounds});
      bool stop = advance < step;

      double nearest = std::numeric_limits<double>::infinity();
      for (const Vec3& q : pts) {
        bool lateral = true;
        for (int j = 0; j < 3 && lateral; ++j) {
          if (j == axis) continue;
          lateral = q[j] >= lo[j] - kLateralTol && q[j] <= hi[j] + kLateralTol;
        }
        if (!lateral) continue;
        const double gap = sign * (q[axis] - face);
        if (gap > 0.0) nearest = std::min(nearest, gap);
      }
      if (nearest <= advance) {
        advance = std::max(0.0, nearest - kClearance);
        stop = true;
      }
      if (sign > 0)
        hi[axis] += advance;
      else
        lo[axis] -= advance;
      if (stop || advance <= 0.0) done[k] = true;
    }
  }

  // Shrunk box in segment-frame coordinates.
  std::array<double, 3> slo{}, shi{};
  std::vector<double> shrinks;
  std::array<bool, 6> clamped{};
  for (int axis = 0; axis < 3; ++axis) {
    const double grown_hi = hi[axis] - seed_hi[axis];
    const double grown_lo = seed_lo[axis] - lo[axis];
    const double s_hi = std::clamp(grown_hi - cfg.min_half_width, 0.0, cfg.shrink);
    const double s_lo = std::clamp(grown_lo - cfg.min_half_width, 0.0, cfg.shrink);
    shi[axis] = hi[axis] - s_hi;
    slo[axis] = lo[axis] + s_lo;
    clamped[2 * axis] = s_hi < cfg.shrink;
    clamped[2 * axis + 1] = s_lo < cfg.shrink;
    shrinks.push_back(s_hi);
    shrinks.push_back(s_lo);
  }

  // A full shrink keeps out the inflation of every occupied center beyond that face. Behind a
  // clamped face some inflated voxels can remain inside, so each one pulls in the face on its far
  // side from the seed segment, which stays inside the box.
  const double inflation = map.config().inflation_radius;
  for (int k = 0; k < 6; ++k) {
    if (!clamped[k]) continue;
    const int axis = k / 2;
    std::array<double, 3> blo = slo, bhi = shi;
    if (k % 2 == 0)
      blo[axis] = std::max(slo[axis], hi[axis] - inflation - map.resolution());
    else
      bhi[axis] = std::min(shi[axis], lo[axis] + inflation + map.resolution());
    if (blo[axis] > bhi[axis]) continue;
    Vec3 wmin = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 wmax = -wmin;
    for (int c = 0; c < 8; ++c) {
      const Vec3 p = a + frame.col(0) * (c & 1 ? bhi[0] : blo[0]) + frame.col(1) * (c & 2 ? bhi[1] : blo[1]) +
                     frame.col(2) * (c & 4 ? bhi[2] : blo[2]);
      wmin = wmin.cwiseMin(p);
      wmax = wmax.cwiseMax(p);
    }
    wmin = wmin.cwiseMax(map_lo);
    wmax = wmax.cwiseMin(map_hi - Vec3::Constant(1e-9));
    if ((wmin.array() > wmax.array()).any()) continue;
    const VoxelIndex vlo = map.world_to_voxel(wmin);
    const VoxelIndex vhi = map.world_to_voxel(wmax);
    for (int z = vlo.z; z <= vhi.z; ++z)
      for (int y = vlo.y; y <= vhi.y; ++y)
        for (int x = vlo.x; x <= vhi.x; ++x) {
          const VoxelIndex v{x, y, z};
          if (!map.is_blocked_unchecked(v, t)) continue;
          const Vec3 q = frame.transpose() * (map.voxel_to_world(v) - a);
          bool inside = true;
          for (int j = 0; j < 3 && inside; ++j) inside = q[j] > slo[j] && q[j] < shi[j];
          if (!inside) continue;
          // Candidate cuts, measured by how far the center sits from the seed segment.
          const std::array<double, 6> gap{q[0] - seed_hi[0], seed_lo[0] - q[0], q[1], -q[1], q[2], -q[2]};
          const int best = static_cast<int>(std::max_element(gap.begin(), gap.end()) - gap.begin());
          if (gap[best] <= 0.0) continue;  // on the seed segment itself; nothing can exclude it
          const int ax = best / 2;
          if (best % 2 == 0) {
            const double face = std::max(q[ax] - kClearance, seed_hi[ax]);
            shrinks[best] += shi[ax] - face;
            shi[ax] = face;
          } else {
            const double face = std::min(q[ax] + kClearance, seed_lo[ax]);
            shrinks[best] += face - slo[ax];
            slo[ax] = face;
          }
        }
  }

  std::vector<Hyperplane> planes;
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 e = frame.col(axis);
    const double base = e.dot(a);
    planes.push_back({e, base + shi[axis]});
    planes.push_back({-e, -(base + slo[axis])});
  }
  if (cfg.inject_nan) planes[0].offset = std::numeric_limits<double>::quiet_NaN();
  if (applied_shrink) *applied_shrink = shrinks;
  return Polyhedron(std::move(planes));
}

Corridor generate_corridor(const VoxelMap& map, const ReferencePath& path, double t, const CorridorConfig& cfg) {
  if (path.waypoints.size() < 2) throw std::invalid_argument("corridor needs a path with at least two waypoints");
  Corridor c;
  const auto& w = path.waypoints;
  c.segments[0] = {w[0], w[1]};
  c.segments[1] = w.size() >= 3 ? std::array<Vec3, 2>{w[1], w[2]} : c.segments[0];
  c.split_arclength = (w[1] - w[0]).norm();
  c.polys[0] = grow_segment_box(map, c.segments[0][0], c.segments[0][1], t, cfg, &c.applied_shrink[0]);
  if (w.size() >= 3) {
    c.polys[1] = grow_segment_box(map, c.segments[1][0], c.segments[1][1], t, cfg, &c.applied_shrink[1]);
  } else {
    c.polys[1] = c.polys[0];
    c.applied_shrink[1] = c.applied_shrink[0];
  }
  return c;
}

}  // namespace forestnav
