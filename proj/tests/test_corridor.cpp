#include <doctest.h>

#include "forestnav/corridor.hpp"
#include "forestnav/planner.hpp"
#include "forestnav/rng.hpp"
#include "oracles.hpp"

using namespace forestnav;

namespace {

VoxelMap open_space() {
  MapConfig c;
  c.origin = Vec3(-5.0, -5.0, -2.0);
  c.resolution = 0.1;
  c.dims = {150, 100, 60};
  c.inflation_radius = 0.4;
  return VoxelMap(c);
}

std::vector<std::pair<Vec3, double>> planes_of(const Polyhedron& p) {
  std::vector<std::pair<Vec3, double>> out;
  for (const auto& h : p.planes()) out.emplace_back(h.normal, h.offset);
  return out;
}

ReferencePath path_of(std::initializer_list<Vec3> pts) {
  ReferencePath p;
  p.waypoints = pts;
  return p;
}

}  // namespace

TEST_CASE("free-space corridor grows to the limit and keeps the segment inside") {
  VoxelMap map = open_space();
  CorridorConfig cfg;
  const auto c = generate_corridor(map, path_of({Vec3(0, 0, 1), Vec3(5, 0, 1)}), 0.0, cfg);
  for (const auto& poly : c.polys) {
    CHECK(poly.size() == 6);
    for (const Vec3& p : {Vec3(0, 0, 1), Vec3(5, 0, 1)}) CHECK(poly.max_violation(p) <= -2.6 + 1e-6);
    const auto verts = oracle::enumerate_vertices(planes_of(poly));
    REQUIRE(verts.size() == 8);
    double xmax = -1e9, xmin = 1e9;
    for (const auto& v : verts) {
      xmax = std::max(xmax, v.x());
      xmin = std::min(xmin, v.x());
    }
    CHECK(xmax == doctest::Approx(5.0 + 3.0 - 0.4).epsilon(1e-6));
    CHECK(xmin == doctest::Approx(-3.0 + 0.4).epsilon(1e-6));
  }
  // a single segment is used for both polyhedra
  CHECK(c.segments[0] == c.segments[1]);
  CHECK(c.assign(2.0) == 0);
}

TEST_CASE("a wall ahead of the segment caps the face one shrink short of it") {
  VoxelMap map = open_space();
  std::vector<Vec3> wall;
  for (double y = -2.0; y <= 2.0; y += 0.1)
    for (double z = 0.0; z <= 2.0; z += 0.1) wall.emplace_back(3.05, y + 0.05, z + 0.05);
  map.integrate_scan(wall, 0.0);
  const Polyhedron poly = grow_segment_box(map, Vec3(0, 0, 1), Vec3(2, 0, 1), 0.0, CorridorConfig{});
  double xmax = -1e9;
  for (const auto& v : oracle::enumerate_vertices(planes_of(poly))) xmax = std::max(xmax, v.x());
  CHECK(xmax <= 3.05 - 0.4 + 1e-9);
  CHECK(xmax >= 3.05 - 0.4 - map.resolution());
  for (const auto& q : wall) CHECK(poly.max_violation(q) > 0.0);
}

TEST_CASE("NaN injection and degenerate segments") {
  VoxelMap map = open_space();
  CorridorConfig cfg;
  cfg.inject_nan = true;
  CHECK_THROWS_AS(generate_corridor(map, path_of({Vec3(0, 0, 1), Vec3(2, 0, 1)}), 0.0, cfg), NaNDetected);
  CHECK_THROWS_AS(generate_corridor(map, path_of({Vec3(0, 0, 1), Vec3(0, 0, 1)}), 0.0, CorridorConfig{}),
                  DegenerateSegment);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Polyhedron({Hyperplane{Vec3(nan, 0, 0), 1.0}}), NaNDetected);
  CHECK_THROWS_AS(Polyhedron({Hyperplane{Vec3(1, 0, 0), std::numeric_limits<double>::infinity()}}), NaNDetected);
  CHECK_THROWS_AS(Polyhedron({Hyperplane{Vec3(2, 0, 0), 1.0}}), std::invalid_argument);
}

TEST_CASE("default bounding box") {
  const Polyhedron box = default_bbox(Vec3(0, 0, 1), 1.0);
  CHECK(box.size() == 6);
  CHECK(box.max_violation(Vec3(0, 0, 1)) == doctest::Approx(-1.0));
  CHECK(box.max_violation(Vec3(0, 0, 2.5)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(default_bbox(Vec3::Zero(), 0.0), std::invalid_argument);

  Rng rng(67);
  for (int i = 0; i < 50; ++i) {
    const Vec3 c(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    const double h = rng.uniform(0.1, 3.0);
    const auto verts = oracle::enumerate_vertices(planes_of(default_bbox(c, h)));
    REQUIRE(verts.size() == 8);
    for (const auto& v : verts)
      for (int k = 0; k < 3; ++k) CHECK(std::abs(v[k] - c[k]) == doctest::Approx(h));
  }
}

TEST_CASE("contains agrees with vertex enumeration on boxes") {
  Rng rng(71);
  for (int i = 0; i < 50; ++i) {
    const Vec3 c(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Polyhedron box = default_bbox(c, rng.uniform(0.2, 2.0));
    const auto verts = oracle::enumerate_vertices(planes_of(box));
    Vec3 lo = verts[0], hi = verts[0];
    for (const auto& v : verts) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    for (int k = 0; k < 40; ++k) {
      const Vec3 p = c + Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
      const bool inside = (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
      CHECK(box.contains(p) == inside);
    }
    CHECK(box.contains(c));
    CHECK(box.contains(Vec3(hi.x(), c.y(), c.z()), 1e-9));
  }
}

TEST_CASE("two segments give two polyhedra split at the first interior waypoint") {
  VoxelMap map = open_space();
  const auto c = generate_corridor(map, path_of({Vec3(0, 0, 1), Vec3(2, 0, 1), Vec3(2, 3, 1)}), 0.0, CorridorConfig{});
  CHECK(c.split_arclength == doctest::Approx(2.0));
  CHECK(c.assign(1.0) == 0);
  CHECK(c.assign(3.0) == 1);
  CHECK(c.polys[1].contains(Vec3(2, 1.5, 1)));
  CHECK(c.polys[0].contains(Vec3(1, 0, 1)));
}

TEST_CASE("corridor generation is deterministic") {
  Rng rng(73);
  VoxelMap map = open_space();
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(rng.uniform(-3, 8), rng.uniform(-3, 3), rng.uniform(-1, 3));
  map.integrate_scan(pts, 0.0);
  const auto path = path_of({Vec3(0, 0, 1), Vec3(1, 0.2, 1.1), Vec3(1.5, 1, 1)});
  const auto a = generate_corridor(map, path, 0.0, CorridorConfig{});
  const auto b = generate_corridor(map, path, 0.0, CorridorConfig{});
  for (int k = 0; k < 2; ++k) {
    REQUIRE(a.polys[k].size() == b.polys[k].size());
    for (std::size_t i = 0; i < a.polys[k].size(); ++i) {
      CHECK(a.polys[k].planes()[i].offset == b.polys[k].planes()[i].offset);
      CHECK(a.polys[k].planes()[i].normal == b.polys[k].planes()[i].normal);
    }
  }
}

TEST_CASE("shrunk polyhedra exclude blocked voxel centers on planned paths") {
  Rng rng(79);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    MapConfig mc;
    mc.resolution = 0.1;
    mc.dims = {60, 40, 20};
    mc.inflation_radius = 0.4;
    VoxelMap map(mc);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(rng.uniform(1.0, 5.0), rng.uniform(0, 4), rng.uniform(0, 2));
    map.integrate_scan(pts, 0.0);
    AStarPlanner planner(map);
    PlanRequest req;
    req.start = Vec3(0.25, 2.05, 1.05);
    req.goal = Vec3(5.85, 2.05, 1.05);
    req.params.w = 0.0;
    if (map.is_blocked_at(req.start, 0.0) || map.is_blocked_at(req.goal, 0.0)) continue;
    const auto r = planner.plan(req, std::numeric_limits<std::uint64_t>::max());
    if (r.status != PlanResult::Status::Path) continue;
    const auto c = generate_corridor(map, *r.path, 0.0, CorridorConfig{});
    const auto mask = oracle::blocked_mask(map, 0.0);
    for (int k = 0; k < 2; ++k) {
      CHECK(c.polys[k].contains(c.segments[k][0], 1e-9));
      CHECK(c.polys[k].contains(c.segments[k][1], 1e-9));
      oracle::for_each_voxel(map, [&](const VoxelIndex& v) {
        if (mask[map.linear(v)]) CHECK(c.polys[k].max_violation(map.voxel_to_world(v)) >= 0.0);
      });
    }
    ++checked;
  }
  CHECK(checked >= 5);
}
