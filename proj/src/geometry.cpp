#include "forestnav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace forestnav {

SegmentProjection project_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len_sq = ab.squaredNorm();
  double t = 0.0;
  if (len_sq > 0.0) {
    t = std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
  }
  const Vec3 q = a + t * ab;
  return {t, q, (p - q).norm()};
}

double point_polyline_distance(const Vec3& p, std::span<const Vec3> polyline) {
  if (polyline.empty()) return std::numeric_limits<double>::infinity();
  if (polyline.size() == 1) return (p - polyline[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    best = std::min(best, point_segment_distance(p, polyline[i], polyline[i + 1]));
  }
  return best;
}

double polyline_length(std::span<const Vec3> polyline) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    len += (polyline[i + 1] - polyline[i]).norm();
  }
  return len;
}

double polyline_project_arclength(const Vec3& p, std::span<const Vec3> polyline) {
  double best_dist = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const auto proj = project_to_segment(p, polyline[i], polyline[i + 1]);
    const double seg_len = (polyline[i + 1] - polyline[i]).norm();
    // strict comparison keeps the earliest segment on ties
    if (proj.distance < best_dist) {
      best_dist = proj.distance;
      best_s = s + proj.t * seg_len;
    }
    s += seg_len;
  }
  return best_s;
}

Vec3 polyline_point_at(std::span<const Vec3> polyline, double s) {
  if (polyline.empty()) return Vec3::Zero();
  if (s <= 0.0) return polyline.front();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec3 d = polyline[i + 1] - polyline[i];
    const double seg_len = d.norm();
    if (acc + seg_len >= s && seg_len > 0.0) {
      const double t = (s - acc) / seg_len;
      return polyline[i] + t * d;
    }
    acc += seg_len;
  }
  return polyline.back();
}

Vec3 polyline_tangent_at(std::span<const Vec3> polyline, double s) {
  double acc = 0.0;
  Vec3 last = Vec3::Zero();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec3 d = polyline[i + 1] - polyline[i];
    const double seg_len = d.norm();
    if (seg_len <= 0.0) continue;
    last = d / seg_len;
    if (acc + seg_len > s) return last;
    acc += seg_len;
  }
  return last;
}

double segment_segment_distance_sq(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest points between two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double kEps = 1e-15;
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return r.squaredNorm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 c1 = p0 + d1 * s;
  const Vec3 c2 = q0 + d2 * t;
  return (c1 - c2).squaredNorm();
}

}  // namespace forestnav
