#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "forestnav/geometry.hpp"
#include "forestnav/occupancy_map.hpp"
#include "forestnav/planner.hpp"

namespace forestnav {

class NaNDetected : public std::runtime_error {
 public:
  NaNDetected() : std::runtime_error("non-finite corridor coefficient") {}
};

class DegenerateSegment : public std::invalid_argument {
 public:
  DegenerateSegment() : std::invalid_argument("corridor segment has zero length") {}
};

// Half-space normal . p - offset <= 0.
struct Hyperplane {
  Vec3 normal;
  double offset;

  double signed_value(const Vec3& p) const { return normal.dot(p) - offset; }
};

// Convex polyhedron in H-representation. Construction rejects non-finite coefficients and
// non-unit normals, so every Polyhedron in circulation is numerically valid.
class Polyhedron {
 public:
  Polyhedron() = default;
  explicit Polyhedron(std::vector<Hyperplane> planes);

  const std::vector<Hyperplane>& planes() const { return planes_; }
  std::size_t size() const { return planes_.size(); }

  double max_violation(const Vec3& p) const;
  bool contains(const Vec3& p, double tol = 0.0) const { return max_violation(p) <= tol; }

 private:
  std::vector<Hyperplane> planes_;
};

// Throws NaNDetected if any coefficient is non-finite.
void validate_planes(const std::vector<Hyperplane>& planes);

Polyhedron default_bbox(const Vec3& center, double half_extent);

struct CorridorConfig {
  double shrink = 0.4;          // inward offset applied to every face (m)
  double max_growth = 3.0;      // growth limit per face beyond the seed segment (m)
  double min_half_width = 0.1;  // the uniform shrink never pulls a face closer than this to the seed (m)
  bool inject_nan = false;      // test hook for the non-finite corridor failure mode
};

struct Corridor {
  std::array<Polyhedron, 2> polys;
  std::array<std::array<Vec3, 2>, 2> segments;  // bound path segment of each polyhedron
  std::array<std::vector<double>, 2> applied_shrink;
  double split_arclength = 0.0;                  // arc length of the first interior waypoint

  // Polyhedron index for a reference point at path arc length s.
  int assign(double s) const { return s <= split_arclength ? 0 : 1; }
};

// Box-grown convex regions around the first two path segments (one, duplicated, if the path has
// a single segment). Growth stops at occupied voxel centers, the map bounds, or max_growth; the
// grown box is then shrunk, and any inflated voxel center still inside pulls in one more face.
// Throws NaNDetected or DegenerateSegment.
Corridor generate_corridor(const VoxelMap& map, const ReferencePath& path, double t, const CorridorConfig& cfg);

// Single-segment growth, exposed for tests. applied_shrink receives the per-face inward offsets.
Polyhedron grow_segment_box(const VoxelMap& map, const Vec3& a, const Vec3& b, double t, const CorridorConfig& cfg,
                            std::vector<double>* applied_shrink = nullptr);

}  // namespace forestnav
