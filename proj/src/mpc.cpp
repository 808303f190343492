#include "forestnav/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace forestnav::mpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void MpcParams::validate() const {
  if (horizon < 2) throw std::invalid_argument("MPC horizon must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("MPC dt must be positive");
  for (const Vec3* w : {&r_u, &r_p, &r_v, &r_a, &r_p_terminal, &r_v_terminal, &r_a_terminal, &r_c})
    if ((w->array() < 0.0).any() || !w->allFinite()) throw std::invalid_argument("MPC weights must be >= 0");
  if ((v_min.array() > v_max.array()).any() || (a_min.array() > a_max.array()).any() ||
      (j_min.array() > j_max.array()).any())
    throw std::invalid_argument("MPC bounds must satisfy min <= max");
}

Reference sample_reference(const ReferencePath& path, const DroneState& state, double v_target,
                           const MpcParams& params) {
  if (path.waypoints.size() < 2) throw std::invalid_argument("reference path needs two waypoints");
  if (!(v_target > 0.0)) throw std::invalid_argument("target speed must be positive");
  const auto& w = path.waypoints;
  const double total = polyline_length(w);
  const double s0 = polyline_project_arclength(state.p, w);
  Reference ref;
  for (int n = 1; n <= params.horizon; ++n) {
    const double s = std::min(s0 + n * v_target * params.dt, total);
    const Vec3 p = polyline_point_at(w, s);
    Vec3 v = polyline_tangent_at(w, s) * v_target;
    if ((p - w.back()).norm() <= params.arrival_radius) v.setZero();
    ref.p.push_back(p);
    ref.v.push_back(v);
    ref.arclength.push_back(s);
  }
  return ref;
}

Reference stop_reference(const DroneState& state, const MpcParams& params) {
  Reference ref;
  ref.p.assign(params.horizon, state.p);
  ref.v.assign(params.horizon, Vec3::Zero());
  ref.arclength.assign(params.horizon, 0.0);
  return ref;
}

StepConstraints assign_corridor(const Corridor& corridor, const Reference& ref) {
  StepConstraints c;
  for (double s : ref.arclength) {
    const int idx = corridor.assign(s);
    c.polys.push_back(&corridor.polys[idx]);
    c.poly_index.push_back(idx);
  }
  return c;
}

StepConstraints single_polyhedron(const Polyhedron& poly, int horizon) {
  StepConstraints c;
  c.polys.assign(horizon, &poly);
  c.poly_index.assign(horizon, 0);
  return c;
}

std::vector<DroneState> predict(const DroneState& x0, const std::vector<Vec3>& jerks, double dt) {
  std::vector<DroneState> out;
  out.reserve(jerks.size());
  DroneState x = x0;
  for (const Vec3& u : jerks) {
    x = propagate(x, u, dt);
    out.push_back(x);
  }
  return out;
}

std::vector<Vec3> unstack(const VectorXd& u) {
  std::vector<Vec3> out;
  for (Index k = 0; k + 2 < u.size(); k += 3) out.emplace_back(u[k], u[k + 1], u[k + 2]);
  return out;
}

namespace {

// Accumulates weighted squared affine residuals w * (row . u + c)^2.
struct CostBuilder {
  MatrixXd H;
  VectorXd g;
  double constant = 0.0;

  explicit CostBuilder(Index n) : H(MatrixXd::Zero(n, n)), g(VectorXd::Zero(n)) {}

  // Row restricted to entries (index, coeff).
  void add(double w, const std::vector<std::pair<Index, double>>& row, double c) {
    if (w == 0.0) return;
    for (const auto& [i, a] : row) {
      g[i] += w * c * a;
      for (const auto& [j, b] : row) H(i, j) += w * a * b;
    }
    constant += w * c * c;
  }
};

}  // namespace

Problem build_problem(const DroneState& state, const Reference& ref, const StepConstraints& constraints,
                      const MpcParams& params) {
  params.validate();
  const int N = params.horizon;
  if (!state.finite()) throw std::invalid_argument("non-finite drone state");
  if (static_cast<int>(ref.p.size()) != N || static_cast<int>(ref.v.size()) != N)
    throw std::invalid_argument("reference length must equal the horizon");
  for (int n = 0; n < N; ++n)
    if (!ref.p[n].allFinite() || !ref.v[n].allFinite()) throw std::invalid_argument("non-finite reference");
  if (static_cast<int>(constraints.polys.size()) != N) throw std::invalid_argument("one polyhedron per step required");
  for (const Polyhedron* poly : constraints.polys) {
    if (poly == nullptr) throw std::invalid_argument("missing polyhedron");
    for (const auto& h : poly->planes())
      if (!h.normal.allFinite() || !std::isfinite(h.offset)) throw std::invalid_argument("non-finite corridor");
  }

  const double dt = params.dt;
  const Index nu = 3 * N;

  // Free response and unit-jerk impulse response, both through propagate().
  const std::vector<DroneState> free = predict(state, std::vector<Vec3>(N, Vec3::Zero()), dt);
  std::vector<Vec3> pulse(N, Vec3::Zero());
  pulse[0] = Vec3::UnitX();
  const std::vector<DroneState> impulse = predict(DroneState{}, pulse, dt);
  // Coefficient of u_k (axis i) on state component at step n (1-based) is impulse[n-k-1].
  auto row_of = [&](int n, int axis, auto member) {
    std::vector<std::pair<Index, double>> row;
    for (int k = 0; k < n; ++k) row.emplace_back(3 * k + axis, (impulse[n - k - 1].*member).x());
    return row;
  };

  CostBuilder cost(nu);
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < 3; ++i) cost.add(params.r_u[i], {{3 * k + i, 1.0}}, 0.0);
  for (int n = 1; n <= N; ++n) {
    const bool terminal = n == N;
    const DroneState& f = free[n - 1];
    for (int i = 0; i < 3; ++i) {
      const double wp = terminal ? params.r_p_terminal[i] : params.r_p[i];
      const double wv = terminal ? params.r_v_terminal[i] : params.r_v[i];
      const double wa = terminal ? params.r_a_terminal[i] : params.r_a[i];
      cost.add(wp, row_of(n, i, &DroneState::p), f.p[i] - ref.p[n - 1][i]);
      // terminal velocity is driven to zero rather than to the reference
      const double v_target = terminal ? 0.0 : ref.v[n - 1][i];
      cost.add(wv, row_of(n, i, &DroneState::v), f.v[i] - v_target);
      cost.add(wa, row_of(n, i, &DroneState::a), f.a[i]);
    }
  }
  for (int k = 0; k + 1 < N; ++k)
    for (int i = 0; i < 3; ++i) cost.add(params.r_c[i], {{3 * (k + 1) + i, 1.0}, {3 * k + i, -1.0}}, 0.0);

  Index corridor_rows = 0;
  for (const Polyhedron* poly : constraints.polys) corridor_rows += static_cast<Index>(poly->size());
  const Index m = 3 * nu + corridor_rows;

  Problem prob;
  prob.qp.P = 2.0 * cost.H;
  prob.qp.q = 2.0 * cost.g;
  prob.constant = cost.constant;
  prob.qp.A = MatrixXd::Zero(m, nu);
  prob.qp.lower = VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  prob.qp.upper = VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  prob.velocity_rows = nu;
  prob.acceleration_rows = nu;
  prob.jerk_rows = nu;
  prob.corridor_rows = corridor_rows;

  Index row = 0;
  for (int n = 1; n <= N; ++n) {
    for (int i = 0; i < 3; ++i, ++row) {
      for (const auto& [j, c] : row_of(n, i, &DroneState::v)) prob.qp.A(row, j) = c;
      prob.qp.lower[row] = params.v_min[i] - free[n - 1].v[i];
      prob.qp.upper[row] = params.v_max[i] - free[n - 1].v[i];
    }
  }
  for (int n = 1; n <= N; ++n) {
    for (int i = 0; i < 3; ++i, ++row) {
      for (const auto& [j, c] : row_of(n, i, &DroneState::a)) prob.qp.A(row, j) = c;
      prob.qp.lower[row] = params.a_min[i] - free[n - 1].a[i];
      prob.qp.upper[row] = params.a_max[i] - free[n - 1].a[i];
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < 3; ++i, ++row) {
      prob.qp.A(row, 3 * k + i) = 1.0;
      prob.qp.lower[row] = params.j_min[i];
      prob.qp.upper[row] = params.j_max[i];
    }
  }
  for (int n = 1; n <= N; ++n) {
    for (const auto& h : constraints.polys[n - 1]->planes()) {
      for (int i = 0; i < 3; ++i)
        for (const auto& [j, c] : row_of(n, i, &DroneState::p)) prob.qp.A(row, j) += h.normal[i] * c;
      prob.qp.upper[row] = h.offset - h.normal.dot(free[n - 1].p);
      ++row;
    }
  }
  return prob;
}

double evaluate_cost(const DroneState& state, const Reference& ref, const std::vector<Vec3>& jerks,
                     const MpcParams& params) {
  const int N = params.horizon;
  const auto xs = predict(state, jerks, params.dt);
  auto wnorm = [](const Vec3& e, const Vec3& w) { return (e.array().square() * w.array()).sum(); };
  double j = 0.0;
  for (int n = 1; n <= N; ++n) j += wnorm(jerks[n - 1], params.r_u);
  for (int n = 1; n < N; ++n) {
    j += wnorm(ref.p[n - 1] - xs[n - 1].p, params.r_p);
    j += wnorm(ref.v[n - 1] - xs[n - 1].v, params.r_v);
    j += wnorm(xs[n - 1].a, params.r_a);
  }
  j += wnorm(ref.p[N - 1] - xs[N - 1].p, params.r_p_terminal);
  j += wnorm(xs[N - 1].v, params.r_v_terminal);
  j += wnorm(xs[N - 1].a, params.r_a_terminal);
  for (int n = 0; n + 1 < N; ++n) j += wnorm(jerks[n + 1] - jerks[n], params.r_c);
  return j;
}

std::string to_string(CommandSource s) {
  switch (s) {
    case CommandSource::Solved: return "solved";
    case CommandSource::FallbackReplay: return "fallback_replay";
    case CommandSource::EmergencyStop: return "emergency_stop";
  }
  return "unknown";
}

Controller::Controller(MpcParams params, qp::Settings solver) : params_(std::move(params)), solver_(solver) {
  params_.validate();
}

void Controller::reset() {
  cached_.clear();
  age_ = 0;
  warm_.reset();
}

ControlCommand Controller::step(const DroneState& state, const TickInput& input) {
  if (input.emergency_stop || input.path == nullptr || input.corridor == nullptr) {
    const Polyhedron box = default_bbox(state.p, params_.stop_box_half_extent);
    return solve_and_emit(state, stop_reference(state, params_), single_polyhedron(box, params_.horizon),
                          CommandSource::EmergencyStop);
  }
  const Reference ref = sample_reference(*input.path, state, input.v_target, params_);
  return solve_and_emit(state, ref, assign_corridor(*input.corridor, ref), CommandSource::Solved);
}

ControlCommand Controller::solve_and_emit(const DroneState& state, const Reference& ref,
                                          const StepConstraints& cons, CommandSource source) {
  qp::Result result;
  try {
    const Problem prob = build_problem(state, ref, cons, params_);
    result = qp::solve(prob.qp, warm_, solver_);
  } catch (const std::invalid_argument&) {
    result.status = qp::Status::Infeasible;
  }
  if (result.status != qp::Status::Solved || !result.x.allFinite()) {
    ControlCommand cmd = fallback(result);
    cmd.emergency_solve_failed = source == CommandSource::EmergencyStop;
    return cmd;
  }

  cached_ = unstack(result.x);
  age_ = 0;
  VectorXd shifted(result.x.size());
  shifted.head(result.x.size() - 3) = result.x.tail(result.x.size() - 3);
  shifted.tail(3) = result.x.tail(3);
  warm_ = qp::WarmStart{shifted, VectorXd()};

  ControlCommand cmd;
  cmd.jerk = cached_[0].cwiseMax(params_.j_min).cwiseMin(params_.j_max);
  cmd.source = source;
  cmd.solver_status = result.status;
  cmd.solver_iterations = result.iterations;
  cmd.primal_residual = result.primal_residual;
  cmd.dual_residual = result.dual_residual;
  return cmd;
}

ControlCommand Controller::fallback(const qp::Result& failed) {
  warm_.reset();
  ControlCommand cmd;
  cmd.source = CommandSource::FallbackReplay;
  cmd.solver_status = failed.status;
  cmd.solver_iterations = failed.iterations;
  cmd.primal_residual = failed.primal_residual;
  cmd.dual_residual = failed.dual_residual;
  ++age_;
  if (!cached_.empty() && age_ < static_cast<int>(cached_.size())) {
    cmd.jerk = cached_[age_];
    cmd.replay_age = age_;
  } else {
    cmd.jerk = Vec3::Zero();
    cmd.replay_age = -1;
    cmd.cache_exhausted = true;
  }
  return cmd;
}

}  // namespace forestnav::mpc
