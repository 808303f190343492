#pragma once

// Independent reference implementations used to check the library. They favour brute force and
// obvious correctness over speed, and share no code with the routines they check beyond plain
// data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "forestnav/forest.hpp"
#include "forestnav/occupancy_map.hpp"
#include "forestnav/qp_solver.hpp"
#include "forestnav/rng.hpp"

namespace oracle {

using forestnav::Vec3;
using forestnav::VoxelIndex;
using forestnav::VoxelMap;

// ---------------------------------------------------------------------------------------------
// Occupancy

inline std::set<VoxelIndex> bin_points(const forestnav::MapConfig& cfg, const std::vector<Vec3>& points) {
  std::set<VoxelIndex> out;
  for (const Vec3& p : points) {
    VoxelIndex v;
    v.x = static_cast<int>(std::floor((p.x() - cfg.origin.x()) / cfg.resolution));
    v.y = static_cast<int>(std::floor((p.y() - cfg.origin.y()) / cfg.resolution));
    v.z = static_cast<int>(std::floor((p.z() - cfg.origin.z()) / cfg.resolution));
    if (v.x < 0 || v.y < 0 || v.z < 0 || v.x >= cfg.dims[0] || v.y >= cfg.dims[1] || v.z >= cfg.dims[2]) continue;
    out.insert(v);
  }
  return out;
}

template <typename F>
void for_each_voxel(const VoxelMap& map, F&& f) {
  const auto& d = map.dims();
  for (int x = 0; x < d[0]; ++x)
    for (int y = 0; y < d[1]; ++y)
      for (int z = 0; z < d[2]; ++z) f(VoxelIndex{x, y, z});
}

inline double center_distance(const VoxelMap& map, const VoxelIndex& a, const VoxelIndex& b) {
  const double r = map.resolution();
  return r * std::sqrt(double((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)));
}

// Raw occupancy from the stored hit time, without the library's occupancy helpers.
inline bool occupied(const VoxelMap& map, const VoxelIndex& v, double t) {
  const auto h = map.last_hit(v);
  return h && t - *h <= map.config().forgetting_threshold;
}

inline bool blocked(const VoxelMap& map, const VoxelIndex& v, double t) {
  bool hit = false;
  for_each_voxel(map, [&](const VoxelIndex& u) {
    if (!hit && occupied(map, u, t) && center_distance(map, u, v) <= map.config().inflation_radius + 1e-12) hit = true;
  });
  return hit;
}

// Full blocked mask computed by scanning every occupied voxel's neighbourhood.
inline std::vector<char> blocked_mask(const VoxelMap& map, double t) {
  const auto& d = map.dims();
  std::vector<char> mask(map.voxel_count(), 0);
  const double r = map.config().inflation_radius;
  const int reach = static_cast<int>(std::ceil(r / map.resolution())) + 1;
  for_each_voxel(map, [&](const VoxelIndex& u) {
    if (!occupied(map, u, t)) return;
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          const VoxelIndex v{u.x + dx, u.y + dy, u.z + dz};
          if (v.x < 0 || v.y < 0 || v.z < 0 || v.x >= d[0] || v.y >= d[1] || v.z >= d[2]) continue;
          if (center_distance(map, u, v) <= r + 1e-12) mask[map.linear(v)] = 1;
        }
  });
  return mask;
}

inline std::optional<VoxelIndex> nearest_free(const VoxelMap& map, const VoxelIndex& q, double t) {
  const auto mask = blocked_mask(map, t);
  std::optional<VoxelIndex> best;
  double best_d = std::numeric_limits<double>::infinity();
  for_each_voxel(map, [&](const VoxelIndex& v) {
    if (mask[map.linear(v)]) return;
    const double d = center_distance(map, v, q);
    if (d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && v < *best)) {
      best_d = d;
      best = v;
    }
  });
  return best;
}

// ---------------------------------------------------------------------------------------------
// Planning

// Dijkstra over 26-connected unblocked voxels with Euclidean edge lengths. Returns +inf when the
// goal is unreachable.
inline double dijkstra(const VoxelMap& map, const VoxelIndex& s, const VoxelIndex& g, double t) {
  const auto mask = blocked_mask(map, t);
  std::vector<double> dist(map.voxel_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const std::size_t si = map.linear(s), gi = map.linear(g);
  if (mask[si] || mask[gi]) return std::numeric_limits<double>::infinity();
  dist[si] = 0.0;
  pq.push({0.0, si});
  while (!pq.empty()) {
    const auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[i]) continue;
    if (i == gi) return d;
    const VoxelIndex u = map.unlinear(i);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (!dx && !dy && !dz) continue;
          const VoxelIndex v{u.x + dx, u.y + dy, u.z + dz};
          if (!map.in_bounds(v) || mask[map.linear(v)]) continue;
          const double nd = d + map.resolution() * std::sqrt(double(dx * dx + dy * dy + dz * dz));
          if (nd < dist[map.linear(v)]) {
            dist[map.linear(v)] = nd;
            pq.push({nd, map.linear(v)});
          }
        }
  }
  return std::numeric_limits<double>::infinity();
}

// Dense sampling of a segment: true if some sample lies at least `margin` inside a blocked voxel
// (or outside the map).
inline bool segment_hits_blocked(const VoxelMap& map, const std::vector<char>& mask, const Vec3& a, const Vec3& b,
                                 double margin) {
  const double r = map.resolution();
  const Vec3 o = map.config().origin;
  const int n = std::max(2, static_cast<int>(std::ceil((b - a).norm() / (r * 0.01))));
  for (int i = 0; i <= n; ++i) {
    const Vec3 p = a + (b - a) * (double(i) / n);
    const Vec3 q = (p - o) / r;
    const Eigen::Vector3d f = q.array().floor();
    const Eigen::Vector3d frac = q - f;
    if ((frac.array() < margin / r).any() || (frac.array() > 1.0 - margin / r).any()) continue;
    const VoxelIndex v{static_cast<int>(f.x()), static_cast<int>(f.y()), static_cast<int>(f.z())};
    if (!map.in_bounds(v) || mask[map.linear(v)]) return true;
  }
  return false;
}

inline double dense_polyline_distance(const Vec3& p, const std::vector<Vec3>& poly, int samples_per_segment) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < poly.size(); ++i)
    for (int k = 0; k <= samples_per_segment; ++k) {
      const Vec3 q = poly[i] + (poly[i + 1] - poly[i]) * (double(k) / samples_per_segment);
      best = std::min(best, (p - q).norm());
    }
  return best;
}

// ---------------------------------------------------------------------------------------------
// Quadratic programming

struct QpOracleResult {
  bool found = false;
  Eigen::VectorXd x;
  double objective = 0.0;
  int active = 0;
};

// Strictly convex QP by active-set enumeration. Subsets are tried in order of increasing size, each
// active row at its lower or upper bound; the first subset whose KKT point is primal feasible with
// correctly signed multipliers is the unique optimum. Sizes above max_active are not explored.
inline QpOracleResult enumerate_active_sets(const forestnav::qp::QuadProgram& prob, int max_active,
                                            double tol = 1e-9) {
  const int n = static_cast<int>(prob.num_vars());
  const int m = static_cast<int>(prob.num_constraints());
  const double inf = forestnav::qp::kInfinity;
  QpOracleResult out;

  std::vector<int> rows;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  auto try_set = [&]() -> bool {
    const int k = static_cast<int>(rows.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = prob.P;
    rhs.head(n) = -prob.q;
    for (int i = 0; i < k; ++i) {
      K.block(n + i, 0, 1, n) = prob.A.row(rows[i]);
      K.block(0, n + i, n, 1) = prob.A.row(rows[i]).transpose();
      rhs(n + i) = side[i] > 0 ? prob.upper(rows[i]) : prob.lower(rows[i]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < n + k) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd ax = prob.A * x;
    const double scale = 1.0 + (m ? ax.cwiseAbs().maxCoeff() : 0.0);
    for (int r = 0; r < m; ++r) {
      if (prob.lower(r) > -inf && ax(r) < prob.lower(r) - tol * scale) return false;
      if (prob.upper(r) < inf && ax(r) > prob.upper(r) + tol * scale) return false;
    }
    // Stationarity P x + q + A_S' y = 0 with y >= 0 at upper bounds and y <= 0 at lower bounds.
    const double yscale = 1.0 + (k ? sol.tail(k).cwiseAbs().maxCoeff() : 0.0);
    for (int i = 0; i < k; ++i) {
      const double y = sol(n + i);
      if (side[i] > 0 && y < -tol * yscale) return false;
      if (side[i] < 0 && y > tol * yscale) return false;
    }
    out.found = true;
    out.x = x;
    out.objective = prob.objective(x);
    out.active = k;
    return true;
  };

  std::vector<int> eq;
  std::vector<int> free_rows;
  for (int r = 0; r < m; ++r) {
    if (prob.lower(r) > -inf && prob.upper(r) < inf && prob.lower(r) == prob.upper(r))
      eq.push_back(r);
    else
      free_rows.push_back(r);
  }
  const int f = static_cast<int>(free_rows.size());

  std::function<bool(int, int)> choose = [&](int from, int left) -> bool {
    if (left == 0) return try_set();
    for (int i = from; i <= f - left; ++i) {
      const int r = free_rows[i];
      for (int s : {-1, 1}) {
        if (s < 0 && prob.lower(r) <= -inf) continue;
        if (s > 0 && prob.upper(r) >= inf) continue;
        rows.push_back(r);
        side.push_back(s);
        const bool done = choose(i + 1, left - 1);
        rows.pop_back();
        side.pop_back();
        if (done) return true;
      }
    }
    return false;
  };

  for (int r : eq) {
    rows.push_back(r);
    side.push_back(0);
  }
  for (int k = 0; k <= std::min(max_active, f); ++k)
    if (choose(0, k)) return out;
  return out;
}

// Random strictly convex QP with n variables and m rows. A few rows are equalities and a few are
// one-sided; the rest are boxes around a feasible anchor point.
inline forestnav::qp::QuadProgram random_qp(forestnav::Rng& rng, int n, int m) {
  forestnav::qp::QuadProgram p;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = rng.normal();
  p.P = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  p.q.resize(n);
  for (int i = 0; i < n; ++i) p.q(i) = rng.normal(0.0, 3.0);
  p.A.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.A(i, j) = rng.normal();
  Eigen::VectorXd anchor(n);
  for (int j = 0; j < n; ++j) anchor(j) = rng.normal(0.0, 0.5);
  const Eigen::VectorXd ax = p.A * anchor;
  p.lower.resize(m);
  p.upper.resize(m);
  const int n_eq = std::min(m, static_cast<int>(rng.uniform_int(0, std::max(0, n / 4))));
  for (int i = 0; i < m; ++i) {
    if (i < n_eq) {
      p.lower(i) = p.upper(i) = ax(i);
      continue;
    }
    const double u = rng.uniform();
    p.lower(i) = ax(i) - rng.uniform(0.1, 3.0);
    p.upper(i) = ax(i) + rng.uniform(0.1, 3.0);
    if (u < 0.15) p.lower(i) = -forestnav::qp::kInfinity * 10;
    else if (u < 0.3) p.upper(i) = forestnav::qp::kInfinity * 10;
  }
  return p;
}

// ---------------------------------------------------------------------------------------------
// Simulation

// Classic RK4 on x' = (v, a, j) with constant jerk, sub-stepped.
struct State9 {
  Vec3 p, v, a;
};

inline State9 rk4(const State9& s0, const Vec3& jerk, double dt, int substeps) {
  auto f = [&](const State9& s) { return State9{s.v, s.a, jerk}; };
  auto add = [](const State9& s, const State9& k, double h) {
    return State9{s.p + k.p * h, s.v + k.v * h, s.a + k.a * h};
  };
  State9 s = s0;
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    const State9 k1 = f(s);
    const State9 k2 = f(add(s, k1, h / 2));
    const State9 k3 = f(add(s, k2, h / 2));
    const State9 k4 = f(add(s, k3, h));
    s.p += (k1.p + 2 * k2.p + 2 * k3.p + k4.p) * (h / 6);
    s.v += (k1.v + 2 * k2.v + 2 * k3.v + k4.v) * (h / 6);
    s.a += (k1.a + 2 * k2.a + 2 * k3.a + k4.a) * (h / 6);
  }
  return s;
}

// Point-to-segment distance by clamped projection, written out independently.
inline double seg_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double L2 = ab.squaredNorm();
  double t = L2 > 0 ? (p - a).dot(ab) / L2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double capsule_sdf(const Vec3& p, const forestnav::Capsule& c) { return seg_dist(p, c.a, c.b) - c.radius; }

inline std::vector<forestnav::Capsule> all_capsules(const forestnav::ForestScene& scene) {
  std::vector<forestnav::Capsule> out;
  for (const auto& t : scene.trees) {
    out.push_back(t.trunk);
    for (const auto& b : t.branches) out.push_back(b);
  }
  return out;
}

// Sphere tracing against a capsule set. Returns the first hit within t_max.
inline std::optional<double> ray_march(const Vec3& o, const Vec3& dir, const std::vector<forestnav::Capsule>& caps,
                                       double t_max) {
  double t = 0.0;
  for (int it = 0; it < 100000 && t <= t_max; ++it) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : caps) d = std::min(d, capsule_sdf(o + t * dir, c));
    if (d < 1e-9) return t;
    t += d;
  }
  return std::nullopt;
}

// Poisson cumulative probability P(X <= k).
inline double poisson_cdf(int k, double lambda) {
  double term = std::exp(-lambda), sum = term;
  for (int i = 1; i <= k; ++i) {
    term *= lambda / i;
    sum += term;
  }
  return sum;
}

// Smallest k with P(X <= k) >= q.
inline int poisson_quantile(double q, double lambda) {
  int k = 0;
  while (poisson_cdf(k, lambda) < q) ++k;
  return k;
}

// Vertices of a 3D H-polyhedron by intersecting plane triples.
inline std::vector<Vec3> enumerate_vertices(const std::vector<std::pair<Vec3, double>>& planes, double tol = 1e-9) {
  std::vector<Vec3> out;
  const std::size_t k = planes.size();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      for (std::size_t l = j + 1; l < k; ++l) {
        Eigen::Matrix3d M;
        M.row(0) = planes[i].first;
        M.row(1) = planes[j].first;
        M.row(2) = planes[l].first;
        if (std::abs(M.determinant()) < 1e-12) continue;
        const Vec3 v = M.inverse() * Vec3(planes[i].second, planes[j].second, planes[l].second);
        bool ok = true;
        for (const auto& pl : planes)
          if (pl.first.dot(v) - pl.second > tol) ok = false;
        if (ok) out.push_back(v);
      }
  return out;
}

}  // namespace oracle
