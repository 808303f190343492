#include "forestnav/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "forestnav/rng.hpp"

namespace forestnav {

double capsule_distance(const Vec3& p, const Capsule& c) {
  return point_segment_distance(p, c.a, c.b) - c.radius;
}

namespace {

std::optional<double> ray_sphere(const Vec3& o, const Vec3& dir, const Vec3& center, double r) {
  const Vec3 oc = o - center;
  const double b = dir.dot(oc);
  const double c = oc.squaredNorm() - r * r;
  const double h = b * b - c;
  if (h < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(h);
  if (t < 0.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> ray_capsule(const Vec3& o, const Vec3& dir, const Capsule& c, double t_max) {
  // Cheap reject against the bounding sphere before the exact test.
  {
    const Vec3 oc = o - 0.5 * (c.a + c.b);
    const double R = 0.5 * (c.b - c.a).norm() + c.radius;
    const double cc = oc.squaredNorm() - R * R;
    if (cc > 0.0) {
      const double bb = dir.dot(oc);
      if (bb >= 0.0) return std::nullopt;
      const double hh = bb * bb - cc;
      if (hh < 0.0 || -bb - std::sqrt(hh) > t_max) return std::nullopt;
    }
  }
  if (capsule_distance(o, c) <= 0.0) return 0.0;
  double best = std::numeric_limits<double>::infinity();

  const Vec3 ba = c.b - c.a;
  const Vec3 oa = o - c.a;
  const double baba = ba.dot(ba);
  const double bard = ba.dot(dir);
  const double baoa = ba.dot(oa);
  const double rdoa = dir.dot(oa);
  const double oaoa = oa.dot(oa);
  const double qa = baba - bard * bard;
  if (baba > 0.0 && qa > 1e-12 * baba) {
    const double qb = baba * rdoa - baoa * bard;
    const double qc = baba * oaoa - baoa * baoa - c.radius * c.radius * baba;
    const double h = qb * qb - qa * qc;
    if (h >= 0.0) {
      const double t = (-qb - std::sqrt(h)) / qa;
      const double y = baoa + t * bard;
      if (t >= 0.0 && y > 0.0 && y < baba) best = t;
    }
  }
  for (const Vec3* end : {&c.a, &c.b})
    if (auto t = ray_sphere(o, dir, *end, c.radius)) best = std::min(best, *t);

  if (best <= t_max) return best;
  return std::nullopt;
}

std::string to_string(BranchLevel level) {
  switch (level) {
    case BranchLevel::Low: return "low";
    case BranchLevel::Medium: return "medium";
    case BranchLevel::High: return "high";
  }
  return "medium";
}

std::string to_string(Complexity c) {
  switch (c) {
    case Complexity::Easy: return "easy";
    case Complexity::Medium: return "medium";
    case Complexity::Difficult: return "difficult";
  }
  return "medium";
}

BranchLevel branch_level_from_string(const std::string& s) {
  if (s == "low") return BranchLevel::Low;
  if (s == "medium") return BranchLevel::Medium;
  if (s == "high") return BranchLevel::High;
  throw std::invalid_argument("unknown branch level: " + s);
}

Complexity classify_density(double trees_per_ha) {
  if (trees_per_ha < 700.0) return Complexity::Easy;
  if (trees_per_ha < 1500.0) return Complexity::Medium;
  return Complexity::Difficult;
}

std::size_t ForestScene::branch_count() const {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.branches.size();
  return n;
}

std::size_t expected_tree_count(double trees_per_ha, const Aabb& bounds) {
  return static_cast<std::size_t>(std::llround(trees_per_ha * bounds.area_xy() / 1e4));
}

namespace {

int mean_branches(BranchLevel level) {
  switch (level) {
    case BranchLevel::Low: return 2;
    case BranchLevel::Medium: return 4;
    case BranchLevel::High: return 8;
  }
  return 4;
}

bool capsule_hits_clearing(const Capsule& c, const Vec3& center, double radius) {
  // Only the xy footprint matters for the clearing test.
  const Vec3 a(c.a.x(), c.a.y(), 0.0), b(c.b.x(), c.b.y(), 0.0), p(center.x(), center.y(), 0.0);
  return point_segment_distance(p, a, b) < radius + c.radius;
}

}  // namespace

ForestScene generate_forest(const ForestParams& params) {
  if (!(params.density > 0.0)) throw std::invalid_argument("forest density must be positive");
  if (!(params.bounds.area_xy() >= 100.0)) throw std::invalid_argument("forest bounds area must be >= 100 m^2");
  if (params.trunk_height_min <= 0.0 || params.trunk_height_max < params.trunk_height_min)
    throw std::invalid_argument("invalid trunk height range");

  ForestScene scene;
  scene.bounds = params.bounds;
  scene.density = params.density;
  scene.branch_level = params.branch_level;
  scene.complexity = classify_density(params.density);
  scene.seed = params.seed;

  const std::size_t n = expected_tree_count(params.density, params.bounds);
  // Half the mean nearest-neighbour scale keeps dart throwing far from jamming.
  const double spacing = 0.5 * std::sqrt(1e4 / params.density);
  scene.min_spacing = spacing;

  Rng rng(mix_seed(params.seed));
  const Vec3& lo = params.bounds.lo;
  const Vec3& hi = params.bounds.hi;

  // Hash grid with cell = spacing so a disc test touches at most 3x3 cells.
  const int gx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / spacing)));
  const int gy = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / spacing)));
  std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(gx) * gy);
  auto cell_of = [&](double x, double y) {
    const int cx = std::clamp(static_cast<int>((x - lo.x()) / spacing), 0, gx - 1);
    const int cy = std::clamp(static_cast<int>((y - lo.y()) / spacing), 0, gy - 1);
    return std::pair{cx, cy};
  };

  std::vector<Vec3> trunks;
  std::vector<double> radii;
  const std::size_t max_attempts = 1000 * std::max<std::size_t>(n, 1);
  std::size_t attempts = 0;
  while (trunks.size() < n) {
    if (++attempts > max_attempts) throw std::runtime_error("infeasible trunk spacing for requested density");
    const double x = rng.uniform(lo.x(), hi.x());
    const double y = rng.uniform(lo.y(), hi.y());
    const double r = rng.uniform(0.1, 0.25);
    bool ok = true;
    for (const Vec3& c : params.clearings)
      if (std::hypot(x - c.x(), y - c.y()) < params.clearing_radius + r) ok = false;
    const auto [cx, cy] = cell_of(x, y);
    for (int yy = std::max(0, cy - 1); ok && yy <= std::min(gy - 1, cy + 1); ++yy)
      for (int xx = std::max(0, cx - 1); ok && xx <= std::min(gx - 1, cx + 1); ++xx)
        for (std::size_t j : grid[static_cast<std::size_t>(yy) * gx + xx])
          if (std::hypot(x - trunks[j].x(), y - trunks[j].y()) < spacing) {
            ok = false;
            break;
          }
    if (!ok) continue;
    grid[static_cast<std::size_t>(cy) * gx + cx].push_back(trunks.size());
    trunks.emplace_back(x, y, 0.0);
    radii.push_back(r);
  }

  const int mean = mean_branches(params.branch_level);
  for (std::size_t i = 0; i < trunks.size(); ++i) {
    Tree tree;
    const double h = rng.uniform(params.trunk_height_min, params.trunk_height_max);
    tree.trunk = Capsule{trunks[i], trunks[i] + Vec3(0.0, 0.0, h), radii[i]};
    const auto count = rng.uniform_int(mean / 2, mean + mean / 2);
    for (std::int64_t k = 0; k < count; ++k) {
      const double z = rng.uniform(0.5, 3.0);
      const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double el = rng.uniform(-35.0, 10.0) * std::numbers::pi / 180.0;
      const double len = rng.uniform(0.3, 0.8);
      const double br = rng.uniform(0.02, 0.05);
      const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const Vec3 base = trunks[i] + Vec3(0.0, 0.0, z);
      Capsule b{base, base + dir * (radii[i] + len), br};
      bool keep = true;
      for (const Vec3& c : params.clearings)
        if (capsule_hits_clearing(b, c, params.clearing_radius)) keep = false;
      if (keep) tree.branches.push_back(b);
    }
    scene.trees.push_back(std::move(tree));
  }
  return scene;
}

namespace {

nlohmann::json capsule_json(const Capsule& c) {
  return nlohmann::json::array({c.a.x(), c.a.y(), c.a.z(), c.b.x(), c.b.y(), c.b.z(), c.radius});
}

Capsule capsule_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 7) throw std::invalid_argument("capsule must have 7 numbers");
  return Capsule{Vec3(j[0], j[1], j[2]), Vec3(j[3], j[4], j[5]), j[6].get<double>()};
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string ForestScene::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["density"] = density;
  j["realized_density"] = realized_density();
  j["branch_level"] = to_string(branch_level);
  j["complexity"] = to_string(complexity);
  j["min_spacing"] = min_spacing;
  j["bounds"] = {{"lo", vec_json(bounds.lo)}, {"hi", vec_json(bounds.hi)}};
  auto& arr = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json tj;
    tj["trunk"] = capsule_json(t.trunk);
    tj["branches"] = nlohmann::json::array();
    for (const auto& b : t.branches) tj["branches"].push_back(capsule_json(b));
    arr.push_back(std::move(tj));
  }
  return j.dump();
}

ForestScene ForestScene::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ForestScene s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.density = j.at("density").get<double>();
  s.branch_level = branch_level_from_string(j.at("branch_level").get<std::string>());
  s.complexity = classify_density(s.density);
  s.min_spacing = j.value("min_spacing", 0.0);
  const auto& lo = j.at("bounds").at("lo");
  const auto& hi = j.at("bounds").at("hi");
  s.bounds = Aabb{Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2])};
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.trunk = capsule_from(tj.at("trunk"));
    for (const auto& bj : tj.at("branches")) t.branches.push_back(capsule_from(bj));
    s.trees.push_back(std::move(t));
  }
  return s;
}

SceneIndex::SceneIndex(const ForestScene& scene, double cell) : scene_(&scene), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("scene index cell must be positive");
  Vec3 lo = scene.bounds.lo, hi = scene.bounds.hi;
  std::uint32_t total = 0;
  for (const auto& t : scene.trees) {
    ref_offset_.push_back(total);
    total += 1 + static_cast<std::uint32_t>(t.branches.size());
    auto grow = [&](const Capsule& c) {
      lo = lo.cwiseMin(c.a.cwiseMin(c.b) - Vec3::Constant(c.radius));
      hi = hi.cwiseMax(c.a.cwiseMax(c.b) + Vec3::Constant(c.radius));
    };
    grow(t.trunk);
    for (const auto& b : t.branches) grow(b);
  }
  lo_ = lo;
  nx_ = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_)));
  cells_.resize(static_cast<std::size_t>(nx_) * ny_);
  stamp_.assign(total, 0);

  for (std::uint32_t i = 0; i < scene.trees.size(); ++i) {
    const Tree& t = scene.trees[i];
    for (std::int32_t b = -1; b < static_cast<std::int32_t>(t.branches.size()); ++b) {
      const Capsule& c = b < 0 ? t.trunk : t.branches[b];
      const Vec3 clo = c.a.cwiseMin(c.b) - Vec3::Constant(c.radius);
      const Vec3 chi = c.a.cwiseMax(c.b) + Vec3::Constant(c.radius);
      for (int y = cell_y(clo.y()); y <= cell_y(chi.y()); ++y)
        for (int x = cell_x(clo.x()); x <= cell_x(chi.x()); ++x)
          cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(Entry{Ref{i, b}, clo.z(), chi.z()});
    }
  }
}

int SceneIndex::cell_x(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - lo_.x()) / cell_)), 0, nx_ - 1);
}

int SceneIndex::cell_y(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - lo_.y()) / cell_)), 0, ny_ - 1);
}

std::optional<double> SceneIndex::raycast(const Vec3& o, const Vec3& dir, double t_max) const {
  if (cells_.empty() || stamp_.empty()) return std::nullopt;
  if (++stamp_value_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    stamp_value_ = 1;
  }

  // Clip the ray to the grid rectangle in xy.
  const double gx0 = lo_.x(), gx1 = lo_.x() + nx_ * cell_;
  const double gy0 = lo_.y(), gy1 = lo_.y() + ny_ * cell_;
  double t0 = 0.0, t1 = t_max;
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = axis == 0 ? gx0 : gy0, hi = axis == 0 ? gx1 : gy1;
    const double d = dir[axis], s = o[axis];
    if (std::abs(d) < 1e-15) {
      if (s < lo || s > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - s) / d, tb = (hi - s) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;

  double best = std::numeric_limits<double>::infinity();
  // A capsule only needs testing in a cell where the ray's height span overlaps the capsule's
  // height span; any hit point lies in such a cell, so skipping elsewhere is exact.
  auto test_cell = [&](int cx, int cy, double ta, double tb) {
    tb = std::min({tb, t1, best});
    const double za = o.z() + dir.z() * ta, zb = o.z() + dir.z() * tb;
    const double zlo = std::min(za, zb) - 1e-9, zhi = std::max(za, zb) + 1e-9;
    for (const Entry& e : cells_[static_cast<std::size_t>(cy) * nx_ + cx]) {
      if (e.zhi < zlo || e.zlo > zhi) continue;
      const Ref& r = e.ref;
      auto& st = stamp_[ref_offset_[r.tree] + static_cast<std::uint32_t>(r.branch + 1)];
      if (st == stamp_value_) continue;
      st = stamp_value_;
      if (auto t = ray_capsule(o, dir, capsule(r), std::min(best, t_max))) best = std::min(best, *t);
    }
  };

  const Vec3 entry = o + dir * t0;
  int cx = cell_x(entry.x()), cy = cell_y(entry.y());
  const int sx = dir.x() > 0 ? 1 : -1, sy = dir.y() > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  auto boundary_t = [&](int axis, int c, int step) {
    const double d = dir[axis];
    if (std::abs(d) < 1e-15) return inf;
    const double edge = (axis == 0 ? lo_.x() : lo_.y()) + (c + (step > 0 ? 1 : 0)) * cell_;
    return (edge - o[axis]) / d;
  };
  double tx = boundary_t(0, cx, sx), ty = boundary_t(1, cy, sy);
  const double dtx = std::abs(dir.x()) < 1e-15 ? inf : cell_ / std::abs(dir.x());
  const double dty = std::abs(dir.y()) < 1e-15 ? inf : cell_ / std::abs(dir.y());
  double enter = t0;
  for (;;) {
    const double exit = std::min(tx, ty);
    test_cell(cx, cy, enter, exit);
    enter = exit;
    if (best <= exit || exit > t1) break;
    if (tx < ty) {
      cx += sx;
      tx += dtx;
    } else {
      cy += sy;
      ty += dty;
    }
    if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) break;
  }
  if (best <= t_max) return best;
  return std::nullopt;
}

}  // namespace forestnav
