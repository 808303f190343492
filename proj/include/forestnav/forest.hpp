#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "forestnav/geometry.hpp"

namespace forestnav {

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

// Distance from p to the capsule surface, negative inside.
double capsule_distance(const Vec3& p, const Capsule& c);

// First intersection parameter in [0, t_max] of the ray o + t*dir (dir unit length) with the
// capsule, or nullopt. A ray starting inside the capsule hits at t = 0.
std::optional<double> ray_capsule(const Vec3& o, const Vec3& dir, const Capsule& c, double t_max);

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  double area_xy() const { return (hi.x() - lo.x()) * (hi.y() - lo.y()); }
  bool contains(const Vec3& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

enum class BranchLevel : std::uint8_t { Low, Medium, High };
enum class Complexity : std::uint8_t { Easy, Medium, Difficult };

std::string to_string(BranchLevel level);
std::string to_string(Complexity c);
BranchLevel branch_level_from_string(const std::string& s);

// Easy below 700 trees/ha, Medium below 1500, Difficult above.
Complexity classify_density(double trees_per_ha);

struct Tree {
  Capsule trunk;
  std::vector<Capsule> branches;
};

struct ForestParams {
  double density = 1040.0;  // trees/ha
  BranchLevel branch_level = BranchLevel::Medium;
  Aabb bounds{Vec3(-5.0, -15.0, 0.0), Vec3(65.0, 15.0, 3.2)};
  std::uint64_t seed = 1;
  std::vector<Vec3> clearings;    // trunk-free discs (xy) around start and goal
  double clearing_radius = 1.5;
  double trunk_height_min = 8.0;
  double trunk_height_max = 16.0;
};

struct ForestScene {
  std::vector<Tree> trees;
  Aabb bounds;
  double density = 0.0;  // requested
  BranchLevel branch_level = BranchLevel::Medium;
  Complexity complexity = Complexity::Medium;
  std::uint64_t seed = 0;
  double min_spacing = 0.0;

  double realized_density() const { return trees.size() / bounds.area_xy() * 1e4; }
  std::size_t branch_count() const;
  std::string to_json() const;
  static ForestScene from_json(const std::string& text);
};

// Expected trunk count for a density over the xy area of the bounds.
std::size_t expected_tree_count(double trees_per_ha, const Aabb& bounds);

// Dart-throwing Poisson-disk trunk placement. Throws std::runtime_error when the spacing cannot be
// satisfied and std::invalid_argument on bad parameters.
ForestScene generate_forest(const ForestParams& params);

// Uniform 2D bucket grid over all capsules for ray casting and proximity queries.
class SceneIndex {
 public:
  explicit SceneIndex(const ForestScene& scene, double cell = 2.0);

  struct Ref {
    std::uint32_t tree;
    std::int32_t branch;  // -1 for the trunk
  };

  const ForestScene& scene() const { return *scene_; }
  const Capsule& capsule(const Ref& r) const {
    const Tree& t = scene_->trees[r.tree];
    return r.branch < 0 ? t.trunk : t.branches[r.branch];
  }

  // Capsules whose xy footprint may come within `pad` of p.
  template <typename F>
  void for_each_near(const Vec3& p, double pad, F&& f) const {
    const int x0 = cell_x(p.x() - pad), x1 = cell_x(p.x() + pad);
    const int y0 = cell_y(p.y() - pad), y1 = cell_y(p.y() + pad);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        for (const Entry& e : cells_[static_cast<std::size_t>(y) * nx_ + x]) f(e.ref);
  }

  // Nearest hit of a ray against capsules (not the ground) within t_max.
  std::optional<double> raycast(const Vec3& o, const Vec3& dir, double t_max) const;

 private:
  int cell_x(double x) const;
  int cell_y(double y) const;

  const ForestScene* scene_;
  double cell_;
  Vec3 lo_;
  int nx_ = 0;
  int ny_ = 0;
  struct Entry {
    Ref ref;
    double zlo, zhi;  // vertical extent of the capsule
  };
  std::vector<std::vector<Entry>> cells_;
  mutable std::vector<std::uint32_t> stamp_;
  mutable std::uint32_t stamp_value_ = 0;
  std::vector<std::uint32_t> ref_offset_;  // per tree, index of its first capsule in the stamp array
};

}  // namespace forestnav
