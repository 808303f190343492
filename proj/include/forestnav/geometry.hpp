#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace forestnav {

using Vec3 = Eigen::Vector3d;

struct SegmentProjection {
  double t;        // clamped segment parameter in [0, 1]
  Vec3 point;      // closest point on the segment
  double distance;
};

SegmentProjection project_to_segment(const Vec3& p, const Vec3& a, const Vec3& b);

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return project_to_segment(p, a, b).distance;
}

// Minimum distance from p to a polyline. Returns +inf for fewer than one point.
double point_polyline_distance(const Vec3& p, std::span<const Vec3> polyline);

double polyline_length(std::span<const Vec3> polyline);

// Closest point on the polyline, as arc length from the first vertex.
double polyline_project_arclength(const Vec3& p, std::span<const Vec3> polyline);

// Point at arc length s, clamped to [0, length].
Vec3 polyline_point_at(std::span<const Vec3> polyline, double s);

// Unit tangent of the segment containing arc length s (zero vector for degenerate input).
Vec3 polyline_tangent_at(std::span<const Vec3> polyline, double s);

// Squared distance between two segments [p0,p1] and [q0,q1].
double segment_segment_distance_sq(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace forestnav
