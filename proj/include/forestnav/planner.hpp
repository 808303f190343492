#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "forestnav/geometry.hpp"
#include "forestnav/occupancy_map.hpp"

namespace forestnav {

struct ReferencePath {
  std::vector<Vec3> waypoints;
  double created_at = 0.0;

  std::size_t segment_count() const { return waypoints.empty() ? 0 : waypoints.size() - 1; }
  double length() const { return polyline_length(waypoints); }
};

// Path-following heuristic weights: h = d_goal + w * d_last_path inside the follow radius.
struct HeuristicParams {
  double w = 150.0;
  double d_follow = 5.0;
  double restrict_fraction = 0.8;  // open-set restriction radius as a fraction of d_follow
};

double follow_heuristic(double d_goal, double d_last_path, double d_start, const HeuristicParams& params);

// Shortest Euclidean distance from n to any segment of the path.
double dist_to_path(const Vec3& n, const ReferencePath& path);

// True iff the segment a-b passes through the interior of no blocked (or out-of-bounds) voxel.
bool segment_is_free(const VoxelMap& map, const Vec3& a, const Vec3& b, double t);

// Greedy line-of-sight pruning of a collision-free waypoint chain.
ReferencePath prune(std::span<const Vec3> raw, const VoxelMap& map, double t);
ReferencePath prune(std::span<const VoxelIndex> raw, const VoxelMap& map, double t);

// Goal unchanged if its voxel is free, else the center of the nearest free voxel.
Vec3 reposition_goal(const VoxelMap& map, const Vec3& goal, double t);

struct PlanRequest {
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
  std::optional<ReferencePath> previous;  // enables the path-following heuristic when set
  HeuristicParams params;
  double t = 0.0;
};

class SearchCompleted : public std::logic_error {
 public:
  SearchCompleted() : std::logic_error("search state already terminated") {}
};

// Resumable A* search state over a VoxelMap.
class SearchState {
 public:
  enum class Mode : std::uint8_t { Following, Plain };

  const PlanRequest& request() const { return request_; }
  Mode mode() const { return mode_; }
  bool beyond_follow_radius() const { return beyond_follow_; }
  std::uint64_t expansions() const { return expansions_total_; }
  bool finished() const { return finished_; }
  std::size_t open_size() const { return open_.size(); }

 private:
  friend class AStarPlanner;

  struct Node {
    double g = 0.0;
    std::uint32_t parent = 0;
    bool closed = false;
  };
  struct OpenEntry {
    double f;
    double g;
    VoxelIndex v;
  };

  PlanRequest request_;
  VoxelIndex start_voxel_{};
  VoxelIndex goal_voxel_{};
  Vec3 start_center_ = Vec3::Zero();
  Vec3 goal_center_ = Vec3::Zero();
  // Segments of the previous path that can be nearest to a node inside the follow radius.
  std::vector<std::pair<Vec3, Vec3>> follow_segments_;
  Mode mode_ = Mode::Plain;
  bool beyond_follow_ = false;
  bool finished_ = false;
  std::uint64_t expansions_total_ = 0;
  std::vector<OpenEntry> open_;  // binary heap
  std::unordered_map<std::uint32_t, Node> nodes_;
};

struct PlanResult {
  enum class Status : std::uint8_t { Path, BudgetExceeded, NoPath };

  Status status = Status::NoPath;
  std::optional<ReferencePath> path;
  std::optional<SearchState> state;   // resumable on BudgetExceeded, finished otherwise
  std::vector<VoxelIndex> raw_path;   // grid path before pruning
  double raw_cost = 0.0;              // sum of grid edge lengths (m)
  std::uint64_t expansions = 0;       // expansions performed during this call
  bool used_plain_fallback = false;
};

// Grid A* over 26-connected voxels with Euclidean edge costs.
//
// The goal term of the heuristic is the exact 26-connected free-space distance to the goal voxel,
// which keeps the plain search (no previous path) consistent and therefore optimal. Budgets count
// node expansions; a search that runs out returns its state, which can be resumed later with the
// same outcome as an uninterrupted run.
class AStarPlanner {
 public:
  explicit AStarPlanner(const VoxelMap& map) : map_(&map) {}

  PlanResult plan(const PlanRequest& request, std::uint64_t budget) const;
  PlanResult resume(SearchState state, std::uint64_t budget) const;

  // Exact 26-connected free-space distance between voxel centers (m).
  static double grid_distance(const VoxelIndex& a, const VoxelIndex& b, double resolution);

 private:
  PlanResult run(SearchState state, std::uint64_t budget) const;
  void seed(SearchState& state, SearchState::Mode mode) const;
  double heuristic(const SearchState& state, const VoxelIndex& v) const;

  const VoxelMap* map_;
};

}  // namespace forestnav
