#include <doctest.h>

#include <cmath>
#include <numbers>

#include "forestnav/lidar.hpp"
#include "forestnav/sim_world.hpp"
#include "oracles.hpp"

using namespace forestnav;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

ForestScene empty_scene() {
  ForestScene s;
  s.bounds = Aabb{Vec3(-40, -40, 0), Vec3(40, 40, 20)};
  s.density = 0.0;
  return s;
}

ForestScene single_trunk(const Vec3& base, double radius) {
  ForestScene s = empty_scene();
  Tree t;
  t.trunk = Capsule{base, base + Vec3(0, 0, 12), radius};
  s.trees.push_back(t);
  return s;
}

ForestParams plot(double density, std::uint64_t seed) {
  ForestParams p;
  p.density = density;
  p.bounds = Aabb{Vec3(0, 0, 0), Vec3(60, 30, 3.2)};
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("forest plots hit the requested stem counts") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // 60 x 30 m is 0.18 ha: 1040 x 0.18 = 187.2 and 2220 x 0.18 = 399.6 stems.
    const auto medium = generate_forest(plot(1040, seed));
    CHECK(medium.trees.size() == 187);
    const auto difficult = generate_forest(plot(2220, seed));
    CHECK(difficult.trees.size() == 400);
    CHECK(std::abs(difficult.realized_density() - 2220) <= 0.05 * 2220);
    CHECK(difficult.complexity == Complexity::Difficult);
    CHECK(medium.complexity == Complexity::Medium);
  }
  CHECK(classify_density(500) == Complexity::Easy);
}

TEST_CASE("forest generation is deterministic and respects the clearings") {
  ForestParams p = plot(2220, 9);
  p.clearings = {Vec3(2, 15, 0), Vec3(58, 15, 0)};
  const auto a = generate_forest(p);
  const auto b = generate_forest(p);
  CHECK(a.to_json() == b.to_json());
  CHECK(ForestScene::from_json(a.to_json()).to_json() == a.to_json());
  for (const auto& t : a.trees) {
    for (const auto& c : p.clearings) CHECK(Vec3(t.trunk.a.x() - c.x(), t.trunk.a.y() - c.y(), 0).norm() >= 1.5);
    CHECK(t.trunk.radius >= 0.1);
    CHECK(t.trunk.radius <= 0.25);
    for (const auto& br : t.branches) {
      CHECK(br.radius >= 0.02);
      CHECK(br.radius <= 0.05);
      CHECK(br.a.z() >= 0.5 - 1e-9);
      CHECK(br.a.z() <= 3.0 + 1e-9);
    }
  }
  for (std::size_t i = 0; i < a.trees.size(); ++i)
    for (std::size_t j = i + 1; j < a.trees.size(); ++j) {
      const Vec3 d = a.trees[i].trunk.a - a.trees[j].trunk.a;
      CHECK(std::hypot(d.x(), d.y()) >= a.min_spacing - 1e-9);
    }
  CHECK_THROWS(generate_forest(plot(-1, 1)));
}

TEST_CASE("more branches at higher branch levels") {
  ForestParams p = plot(1040, 3);
  p.branch_level = BranchLevel::Low;
  const auto low = generate_forest(p);
  p.branch_level = BranchLevel::High;
  const auto high = generate_forest(p);
  CHECK(high.branch_count() > low.branch_count());
}

TEST_CASE("lidar over empty ground sees only the ground") {
  const ForestScene scene = empty_scene();
  LidarConfig cfg;
  cfg.rays_per_scan = 2000;
  Lidar lidar(scene, cfg, 1);
  const Vec3 origin(0, 0, 1);
  const auto pts = lidar.scan(origin, 0);
  CHECK_FALSE(pts.empty());
  const double min_horizontal = 1.0 / std::tan(7.0 * kDeg);
  for (const Vec3& p : pts) {
    CHECK(std::abs(p.z()) < 1e-9);
    const double horiz = std::hypot(p.x(), p.y());
    CHECK(horiz >= min_horizontal - 1e-6);
    CHECK((p - origin).norm() <= cfg.range + 1e-9);
  }
}

TEST_CASE("lidar pattern stays in the field of view and does not repeat") {
  LidarConfig cfg;
  cfg.rays_per_scan = 1000;
  Lidar lidar(empty_scene(), cfg, 2);
  std::set<std::pair<long, long>> seen;
  for (std::uint64_t k = 0; k < 5000; ++k) {
    const Vec3 d = lidar.ray_direction(k);
    CHECK(d.norm() == doctest::Approx(1.0));
    const double el = std::asin(d.z()) / kDeg;
    CHECK(el >= -7.0 - 1e-9);
    CHECK(el <= 52.0 + 1e-9);
    seen.insert({std::lround(d.x() * 1e9), std::lround(d.y() * 1e9)});
  }
  CHECK(seen.size() == 5000);
}

TEST_CASE("single trunk ahead returns a cluster at its range and bearing") {
  const ForestScene scene = single_trunk(Vec3(5, 0, 0), 0.2);
  LidarConfig cfg;
  cfg.rays_per_scan = 20000;
  Lidar lidar(scene, cfg, 3);
  const auto pts = lidar.scan(Vec3(0, 0, 1), 0);
  int on_trunk = 0;
  for (const Vec3& p : pts) {
    if (p.z() < 1e-6) continue;
    ++on_trunk;
    CHECK(std::hypot(p.x() - 5, p.y()) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(std::abs(std::atan2(p.y(), p.x())) < std::atan2(0.2, 4.8) + 1e-6);
  }
  CHECK(on_trunk > 0);
}

TEST_CASE("ray casting agrees with sphere tracing") {
  ForestParams p = plot(2220, 4);
  const auto scene = generate_forest(p);
  const SceneIndex index(scene);
  const auto caps = oracle::all_capsules(scene);
  Rng rng(127);
  int hits = 0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 o(rng.uniform(5, 55), rng.uniform(5, 25), rng.uniform(0.5, 2.5));
    bool inside = false;
    for (const auto& c : caps) inside = inside || oracle::capsule_sdf(o, c) <= 0.0;
    if (inside) continue;
    const double az = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double el = rng.uniform(-7, 52) * kDeg;
    const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const auto got = index.raycast(o, dir, 30.0);
    const auto expect = oracle::ray_march(o, dir, caps, 30.0);
    REQUIRE(got.has_value() == expect.has_value());
    if (got) {
      ++hits;
      CHECK(std::abs(*got - *expect) < 1e-4);
    }
  }
  CHECK(hits > 10);
}

TEST_CASE("collision checks") {
  const ForestScene trunk = single_trunk(Vec3(0, 0, 0), 0.2);
  CHECK_FALSE(check_collision(Vec3(1.5, 0, 1), trunk, 0.3));
  const auto c = check_collision(Vec3(0.49, 0, 1), trunk, 0.3);
  REQUIRE(c);
  CHECK(c->severity == Severity::Fatal);
  CHECK(c->tree == 0);
  const auto g = check_collision(Vec3(5, 5, 0.2), trunk, 0.3);
  REQUIRE(g);
  CHECK(g->ground);
  CHECK(g->severity == Severity::Fatal);

  ForestScene branchy = single_trunk(Vec3(0, 0, 0), 0.2);
  branchy.trees[0].branches.push_back(Capsule{Vec3(0, 0, 1.5), Vec3(1.5, 0, 1.4), 0.03});
  const auto b = check_collision(Vec3(1.0, 0.2, 1.45), branchy, 0.3);
  REQUIRE(b);
  CHECK(b->severity == Severity::Minor);
  CHECK(b->branch == 0);

  const auto scene = generate_forest(plot(2220, 6));
  const SceneIndex index(scene);
  const auto caps = oracle::all_capsules(scene);
  Rng rng(131);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(0, 60), rng.uniform(0, 30), rng.uniform(0.1, 3.0));
    double trunk_d = 1e9, branch_d = 1e9;
    std::size_t k = 0;
    for (const auto& t : scene.trees) {
      trunk_d = std::min(trunk_d, oracle::capsule_sdf(p, caps[k++]));
      for (std::size_t j = 0; j < t.branches.size(); ++j) branch_d = std::min(branch_d, oracle::capsule_sdf(p, caps[k++]));
    }
    const bool fatal = trunk_d < 0.3 || p.z() < 0.3;
    const bool minor = !fatal && branch_d < 0.3;
    const auto brute = check_collision(p, scene, 0.3);
    const auto fast = check_collision(p, index, 0.3);
    CHECK(brute.has_value() == (fatal || minor));
    CHECK(fast.has_value() == brute.has_value());
    if (brute) {
      CHECK((brute->severity == Severity::Fatal) == fatal);
      CHECK(fast->severity == brute->severity);
    }
  }
}

TEST_CASE("gravity initialisation") {
  std::vector<Vec3> level(200, Vec3(0, 0, -9.81));
  CHECK(gravity_init(level).isApprox(Vec3(0, 0, -1)));
  CHECK_THROWS_AS(gravity_init(std::vector<Vec3>(199, Vec3(0, 0, -9.81))), std::invalid_argument);
  CHECK_THROWS_AS(gravity_init(std::vector<Vec3>(200, Vec3::Zero())), std::invalid_argument);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Eigen::Matrix3d body_from_world = Eigen::AngleAxisd(10.0 * kDeg, Vec3::UnitY()).toRotationMatrix();
    const auto samples = sample_accelerometer(body_from_world, 0.1, 200, rng);
    const Vec3 g = gravity_init(samples);
    const Vec3 truth = body_from_world * Vec3(0, 0, -1);
    CHECK(std::acos(std::clamp(g.dot(truth), -1.0, 1.0)) < 0.5 * kDeg);
    CHECK((level_rotation(g) * g).isApprox(Vec3(0, 0, -1)));
  }
}

TEST_CASE("leaf events follow Poisson counts") {
  CHECK(leaf_rate_per_minute(LeafProfile::Rarely) == 0.5);
  CHECK(leaf_rate_per_minute(LeafProfile::Occasionally) == 2.0);
  CHECK(leaf_rate_per_minute(LeafProfile::Often) == 6.0);
  CHECK(spawn_leaf_events(LeafProfile::None, 1, 60.0).empty());

  for (LeafProfile prof : {LeafProfile::Rarely, LeafProfile::Often}) {
    const double lambda = leaf_rate_per_minute(prof);
    const int n = 4000;
    std::vector<int> hist(64, 0);
    for (int s = 0; s < n; ++s) {
      const auto ev = spawn_leaf_events(prof, static_cast<std::uint64_t>(s), 60.0);
      for (const auto& e : ev) {
        CHECK(e.offset.norm() <= kLeafAttachRadius + 1e-12);
        CHECK(e.lifetime > 0.0);
        CHECK(e.trigger_time < 60.0);
      }
      ++hist[std::min<std::size_t>(ev.size(), 63)];
    }
    double cum = 0.0, worst = 0.0;
    for (int k = 0; k < 30; ++k) {
      cum += hist[k] / double(n);
      worst = std::max(worst, std::abs(cum - oracle::poisson_cdf(k, lambda)));
    }
    CHECK(worst < 0.03);
    // The central 90% of the count distribution.
    const int lo = oracle::poisson_quantile(0.05, lambda), hi = oracle::poisson_quantile(0.95, lambda);
    int inside = 0;
    for (int k = lo; k <= hi; ++k) inside += hist[k];
    CHECK(inside / double(n) >= 0.88);
  }
  const auto a = spawn_leaf_events(LeafProfile::Often, 77, 60.0);
  const auto b = spawn_leaf_events(LeafProfile::Often, 77, 60.0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].trigger_time == b[i].trigger_time);
}

TEST_CASE("odometry noise") {
  const DroneState truth{Vec3(1, 2, 3), Vec3(0.5, 0, 0), Vec3::Zero()};
  Odometry clean(OdometryConfig{}, 1);
  const DroneState e = clean.estimate(truth, 0.0);
  CHECK(e.p == truth.p);
  CHECK(e.v == truth.v);

  OdometryConfig drift;
  drift.drift_sd = 0.001;
  drift.drift_bound = 10.0;
  double sum_sq = 0.0;
  const int runs = 300;
  for (int r = 0; r < runs; ++r) {
    Odometry odo(drift, static_cast<std::uint64_t>(r));
    for (int k = 0; k <= 1500; ++k) odo.estimate(truth, k * 0.1);
    sum_sq += odo.drift().squaredNorm();
  }
  // a 150 s walk at 1 mm/sqrt(s) per axis
  const double rms_axis = std::sqrt(sum_sq / (3.0 * runs));
  CHECK(rms_axis == doctest::Approx(0.001 * std::sqrt(150.0)).epsilon(0.1));

  OdometryConfig noisy;
  noisy.position_noise_sd = 0.05;
  Odometry a(noisy, 9), b(noisy, 9);
  for (int k = 0; k < 10; ++k) CHECK(a.estimate(truth, k * 0.1).p == b.estimate(truth, k * 0.1).p);
}
