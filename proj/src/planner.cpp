#include "forestnav/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace forestnav {
namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kSqrt3 = std::sqrt(3.0);

struct Neighbor {
  int dx, dy, dz;
  double unit_cost;
};

std::array<Neighbor, 26> make_neighbors() {
  std::array<Neighbor, 26> out{};
  std::size_t k = 0;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const int nz = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (nz == 0) continue;
        out[k++] = {dx, dy, dz, nz == 1 ? 1.0 : (nz == 2 ? kSqrt2 : kSqrt3)};
      }
  return out;
}

const std::array<Neighbor, 26> kNeighbors = make_neighbors();

}  // namespace

double follow_heuristic(double d_goal, double d_last_path, double d_start, const HeuristicParams& params) {
  if (d_start <= params.d_follow) return d_goal + params.w * d_last_path;
  return d_goal;
}

double dist_to_path(const Vec3& n, const ReferencePath& path) { return point_polyline_distance(n, path.waypoints); }

bool segment_is_free(const VoxelMap& map, const Vec3& a, const Vec3& b, double t) {
  const auto& cfg = map.config();
  const Vec3 ua = (a - cfg.origin) / cfg.resolution;
  const Vec3 ub = (b - cfg.origin) / cfg.resolution;
  const auto va = map.try_world_to_voxel(a);
  const auto vb = map.try_world_to_voxel(b);
  if (!va || !vb) return false;

  // Amanatides-Woo traversal. Crossings that coincide (within eps) step all tied axes at
  // once, so voxels the segment only touches along an edge or corner are not visited.
  std::array<int, 3> cur{va->x, va->y, va->z};
  const std::array<int, 3> end{vb->x, vb->y, vb->z};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  const Vec3 dir = ub - ua;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] > 0.0) {
      step[i] = 1;
      t_max[i] = (std::floor(ua[i]) + 1.0 - ua[i]) / dir[i];
      t_delta[i] = 1.0 / dir[i];
    } else if (dir[i] < 0.0) {
      step[i] = -1;
      t_max[i] = (ua[i] - std::floor(ua[i])) / -dir[i];
      t_delta[i] = -1.0 / dir[i];
    } else {
      step[i] = 0;
      t_max[i] = std::numeric_limits<double>::infinity();
      t_delta[i] = std::numeric_limits<double>::infinity();
    }
  }
  constexpr double kTieEps = 1e-12;
  const int max_steps = std::abs(end[0] - cur[0]) + std::abs(end[1] - cur[1]) + std::abs(end[2] - cur[2]) + 3;
  for (int iter = 0; iter <= max_steps; ++iter) {
    const VoxelIndex v{cur[0], cur[1], cur[2]};
    if (!map.in_bounds(v) || map.is_blocked_unchecked(v, t)) return false;
    if (cur == end) return true;
    const double t_min = std::min({t_max[0], t_max[1], t_max[2]});
    if (t_min > 1.0) return true;
    for (int i = 0; i < 3; ++i) {
      if (t_max[i] <= t_min + kTieEps) {
        cur[i] += step[i];
        t_max[i] += t_delta[i];
      }
    }
  }
  return true;
}

ReferencePath prune(std::span<const Vec3> raw, const VoxelMap& map, double t) {
  std::vector<Vec3> chain;
  chain.reserve(raw.size());
  for (const Vec3& p : raw)
    if (chain.empty() || chain.back() != p) chain.push_back(p);

  ReferencePath out;
  out.created_at = t;
  if (chain.empty()) return out;
  out.waypoints.push_back(chain.front());
  std::size_t anchor = 0;
  for (std::size_t j = 1; j < chain.size(); ++j) {
    if (segment_is_free(map, chain[anchor], chain[j], t)) continue;
    // chain[j-1] is the farthest visible point; fall back to chain[j] when nothing is visible
    const std::size_t keep = (j - 1 > anchor) ? j - 1 : j;
    out.waypoints.push_back(chain[keep]);
    anchor = keep;
  }
  if (out.waypoints.back() != chain.back()) out.waypoints.push_back(chain.back());
  return out;
}

ReferencePath prune(std::span<const VoxelIndex> raw, const VoxelMap& map, double t) {
  std::vector<Vec3> centers;
  centers.reserve(raw.size());
  for (const auto& v : raw) centers.push_back(map.voxel_to_world(v));
  return prune(std::span<const Vec3>(centers), map, t);
}

Vec3 reposition_goal(const VoxelMap& map, const Vec3& goal, double t) {
  const VoxelIndex v = map.world_to_voxel(goal);
  if (!map.is_blocked_unchecked(v, t)) return goal;
  return map.voxel_to_world(map.nearest_free(v, t));
}

double AStarPlanner::grid_distance(const VoxelIndex& a, const VoxelIndex& b, double resolution) {
  std::array<int, 3> d{std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)};
  std::sort(d.begin(), d.end());  // d[0] <= d[1] <= d[2]
  return resolution * (kSqrt3 * d[0] + kSqrt2 * (d[1] - d[0]) + (d[2] - d[1]));
}

double AStarPlanner::heuristic(const SearchState& s, const VoxelIndex& v) const {
  const double d_goal = grid_distance(v, s.goal_voxel_, map_->resolution());
  if (s.mode_ != SearchState::Mode::Following) return d_goal;
  const Vec3 c = map_->voxel_to_world(v);
  const double d_start = (c - s.start_center_).norm();
  if (d_start > s.request_.params.d_follow) return d_goal;
  double d_path = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : s.follow_segments_) d_path = std::min(d_path, point_segment_distance(c, a, b));
  return follow_heuristic(d_goal, d_path, d_start, s.request_.params);
}

namespace {

bool lower_priority(const auto& a, const auto& b) {
  if (a.f != b.f) return a.f > b.f;
  if (a.g != b.g) return a.g < b.g;
  return b.v < a.v;
}

}  // namespace

void AStarPlanner::seed(SearchState& s, SearchState::Mode mode) const {
  s.mode_ = mode;
  s.beyond_follow_ = false;
  s.open_.clear();
  s.nodes_.clear();
  s.nodes_.reserve(1 << 14);
  const auto start_id = static_cast<std::uint32_t>(map_->linear(s.start_voxel_));
  s.nodes_[start_id] = {0.0, start_id, false};
  s.open_.push_back({heuristic(s, s.start_voxel_), 0.0, s.start_voxel_});
}

PlanResult AStarPlanner::plan(const PlanRequest& request, std::uint64_t budget) const {
  if (request.start == request.goal) throw std::invalid_argument("start and goal coincide");
  SearchState s;
  s.request_ = request;
  s.start_voxel_ = map_->world_to_voxel(request.start);
  s.goal_voxel_ = map_->world_to_voxel(request.goal);
  s.start_center_ = map_->voxel_to_world(s.start_voxel_);
  s.goal_center_ = map_->voxel_to_world(s.goal_voxel_);
  if (request.previous && request.previous->waypoints.size() < 2)
    throw std::invalid_argument("previous path needs at least two waypoints");
  if (request.previous) {
    // A node within d_follow of the start is at most D0 + d_follow from the path, where D0 is the
    // start's own distance, so segments farther than D0 + 2 d_follow from the start never win.
    const auto& w = request.previous->waypoints;
    std::vector<double> ds;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) ds.push_back(point_segment_distance(s.start_center_, w[i], w[i + 1]));
    const double keep = *std::min_element(ds.begin(), ds.end()) + 2.0 * request.params.d_follow + 1e-9;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
      if (ds[i] <= keep) s.follow_segments_.emplace_back(w[i], w[i + 1]);
  }

  if (map_->is_blocked_unchecked(s.goal_voxel_, request.t)) {
    PlanResult r;
    r.status = PlanResult::Status::NoPath;
    return r;
  }
  seed(s, request.previous ? SearchState::Mode::Following : SearchState::Mode::Plain);
  return run(std::move(s), budget);
}

PlanResult AStarPlanner::resume(SearchState state, std::uint64_t budget) const {
  if (state.finished_) throw SearchCompleted();
  return run(std::move(state), budget);
}

PlanResult AStarPlanner::run(SearchState s, std::uint64_t budget) const {
  PlanResult result;
  const double t = s.request_.t;
  const double res = map_->resolution();
  const auto& params = s.request_.params;
  const double restrict_radius = params.restrict_fraction * params.d_follow;
  auto cmp = [](const SearchState::OpenEntry& a, const SearchState::OpenEntry& b) { return lower_priority(a, b); };

  std::uint64_t used = 0;
  // A following search that has already switched to plain mode in an earlier slice.
  result.used_plain_fallback = s.mode_ == SearchState::Mode::Plain && s.request_.previous.has_value();
  while (true) {
    while (!s.open_.empty() && s.nodes_[static_cast<std::uint32_t>(map_->linear(s.open_.front().v))].closed) {
      std::pop_heap(s.open_.begin(), s.open_.end(), cmp);
      s.open_.pop_back();
    }
    if (s.open_.empty()) {
      if (s.mode_ == SearchState::Mode::Following) {
        seed(s, SearchState::Mode::Plain);
        result.used_plain_fallback = true;
        continue;
      }
      s.finished_ = true;
      result.status = PlanResult::Status::NoPath;
      result.expansions = used;
      result.state = std::move(s);
      return result;
    }
    if (used >= budget) {
      result.status = PlanResult::Status::BudgetExceeded;
      result.expansions = used;
      result.state = std::move(s);
      return result;
    }

    std::pop_heap(s.open_.begin(), s.open_.end(), cmp);
    const SearchState::OpenEntry top = s.open_.back();
    s.open_.pop_back();
    const auto id = static_cast<std::uint32_t>(map_->linear(top.v));
    SearchState::Node& node = s.nodes_[id];
    node.closed = true;

    if (top.v == s.goal_voxel_) {
      s.finished_ = true;
      result.status = PlanResult::Status::Path;
      result.expansions = used;
      result.raw_cost = node.g;
      std::vector<VoxelIndex> rev;
      std::uint32_t cur = id;
      const auto start_id = static_cast<std::uint32_t>(map_->linear(s.start_voxel_));
      while (true) {
        rev.push_back(map_->unlinear(cur));
        if (cur == start_id) break;
        cur = s.nodes_.at(cur).parent;
      }
      result.raw_path.assign(rev.rbegin(), rev.rend());

      std::vector<Vec3> chain;
      chain.reserve(result.raw_path.size() + 2);
      chain.push_back(s.request_.start);
      for (const auto& v : result.raw_path) chain.push_back(map_->voxel_to_world(v));
      chain.push_back(s.request_.goal);
      result.path = prune(std::span<const Vec3>(chain), *map_, t);
      result.state = std::move(s);
      return result;
    }

    ++used;
    ++s.expansions_total_;
    const double g = node.g;
    const Vec3 center = map_->voxel_to_world(top.v);
    if (s.mode_ == SearchState::Mode::Following && !s.beyond_follow_ &&
        (center - s.start_center_).norm() > params.d_follow)
      s.beyond_follow_ = true;

    for (const auto& nb : kNeighbors) {
      const VoxelIndex n{top.v.x + nb.dx, top.v.y + nb.dy, top.v.z + nb.dz};
      if (!map_->in_bounds(n) || map_->is_blocked_unchecked(n, t)) continue;
      if (s.mode_ == SearchState::Mode::Following && s.beyond_follow_ &&
          (map_->voxel_to_world(n) - s.start_center_).norm() < restrict_radius)
        continue;
      const auto nid = static_cast<std::uint32_t>(map_->linear(n));
      const double g_new = g + nb.unit_cost * res;
      auto [it, inserted] = s.nodes_.try_emplace(nid);
      SearchState::Node& rec = it->second;
      if (!inserted && (rec.closed || rec.g <= g_new)) continue;
      rec.g = g_new;
      rec.parent = id;
      s.open_.push_back({g_new + heuristic(s, n), g_new, n});
      std::push_heap(s.open_.begin(), s.open_.end(), cmp);
    }
  }
}

}  // namespace forestnav
