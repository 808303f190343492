#include <doctest.h>

#include "forestnav/qp_solver.hpp"
#include "forestnav/rng.hpp"
#include "oracles.hpp"

using namespace forestnav;
using namespace forestnav::qp;

namespace {

QuadProgram unconstrained_1d() {
  QuadProgram p;
  p.P = MatrixXd::Identity(1, 1);
  p.q = VectorXd::Constant(1, -1.0);
  p.A = MatrixXd::Zero(0, 1);
  p.lower = VectorXd(0);
  p.upper = VectorXd(0);
  return p;
}

}  // namespace

TEST_CASE("analytic optima") {
  SUBCASE("unconstrained scalar") {
    const Result r = solve(unconstrained_1d());
    CHECK(r.status == Status::Solved);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("projection onto a half-space") {
    QuadProgram p;
    p.P = MatrixXd::Identity(3, 3);
    p.q = VectorXd::Zero(3);
    p.A = MatrixXd::Zero(1, 3);
    p.A(0, 0) = 1.0;
    p.lower = VectorXd::Constant(1, 2.0);
    p.upper = VectorXd::Constant(1, kInfinity);
    const Result r = solve(p);
    CHECK(r.status == Status::Solved);
    CHECK(r.x(0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(std::abs(r.x(1)) < 1e-6);
    CHECK(std::abs(r.x(2)) < 1e-6);
  }
}

TEST_CASE("random strictly convex programs match active-set enumeration") {
  Rng rng(83);
  int compared = 0;
  for (int i = 0; i < 40; ++i) {
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    const int m = static_cast<int>(rng.uniform_int(0, 12));
    const QuadProgram p = oracle::random_qp(rng, n, m);
    const auto ref = oracle::enumerate_active_sets(p, std::min(n, 5));
    if (!ref.found) continue;
    const Result r = solve(p);
    REQUIRE(r.status == Status::Solved);
    CHECK(std::abs(r.objective - ref.objective) <= 1e-6 * std::max(1.0, std::abs(ref.objective)));
    const VectorXd ax = p.A * r.x;
    for (int k = 0; k < m; ++k) {
      CHECK(ax(k) >= p.lower(k) - 1e-4);
      CHECK(ax(k) <= p.upper(k) + 1e-4);
    }
    ++compared;
  }
  CHECK(compared >= 30);
}

TEST_CASE("solves are deterministic") {
  Rng rng(89);
  const QuadProgram p = oracle::random_qp(rng, 6, 10);
  const Result a = solve(p);
  const Result b = solve(p);
  CHECK(a.iterations == b.iterations);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
}

TEST_CASE("warm start from the solution converges no slower") {
  Rng rng(97);
  Settings s;
  s.polish = false;
  for (int i = 0; i < 20; ++i) {
    const QuadProgram p = oracle::random_qp(rng, static_cast<int>(rng.uniform_int(2, 10)),
                                            static_cast<int>(rng.uniform_int(1, 15)));
    const Result cold = solve(p, std::nullopt, s);
    if (cold.status != Status::Solved) continue;
    const Result warm = solve(p, WarmStart{cold.x, cold.y}, s);
    CHECK(warm.status == Status::Solved);
    CHECK(warm.iterations <= cold.iterations);
  }
}

TEST_CASE("objective scaling leaves the minimiser unchanged") {
  Rng rng(101);
  for (int i = 0; i < 20; ++i) {
    QuadProgram p = oracle::random_qp(rng, 5, 8);
    const Result a = solve(p);
    p.P *= 7.5;
    p.q *= 7.5;
    const Result b = solve(p);
    if (a.status != Status::Solved || b.status != Status::Solved) continue;
    CHECK((a.x - b.x).norm() <= 1e-3 * std::max(1.0, a.x.norm()));
  }
}

TEST_CASE("merit residual trends downward") {
  // Statistical property: across random instances the final merit is below the first recorded
  // one, and most check-to-check steps do not increase it.
  Rng rng(103);
  Settings s;
  s.record_history = true;
  s.polish = false;
  int steps = 0, increases = 0, instances = 0;
  for (int i = 0; i < 30; ++i) {
    const QuadProgram p = oracle::random_qp(rng, 8, 12);
    const Result r = solve(p, std::nullopt, s);
    if (r.merit_history.size() < 2) continue;
    ++instances;
    CHECK(r.merit_history.back() <= r.merit_history.front());
    for (std::size_t k = 1; k < r.merit_history.size(); ++k) {
      ++steps;
      if (r.merit_history[k] > r.merit_history[k - 1]) ++increases;
    }
  }
  CHECK(instances > 0);
  CHECK(increases <= steps / 3);
}

TEST_CASE("infeasible and malformed programs") {
  QuadProgram p;
  p.P = MatrixXd::Identity(2, 2);
  p.q = VectorXd::Zero(2);
  p.A = MatrixXd(2, 2);
  p.A << 1, 0, 1, 0;
  p.lower = Eigen::Vector2d(1.0, -kInfinity);
  p.upper = Eigen::Vector2d(kInfinity, -1.0);
  CHECK(solve(p).status == Status::Infeasible);

  QuadProgram bad = unconstrained_1d();
  bad.q(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  QuadProgram asym;
  asym.P = MatrixXd(2, 2);
  asym.P << 1, 0.5, 0, 1;
  asym.q = VectorXd::Zero(2);
  asym.A = MatrixXd::Zero(0, 2);
  asym.lower = VectorXd(0);
  asym.upper = VectorXd(0);
  CHECK_THROWS_AS(validate(asym), std::invalid_argument);
  QuadProgram crossed = p;
  crossed.lower = Eigen::Vector2d(1.0, 0.0);
  crossed.upper = Eigen::Vector2d(0.0, 1.0);
  CHECK_THROWS_AS(validate(crossed), std::invalid_argument);
}
