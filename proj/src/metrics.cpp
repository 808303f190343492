#include "forestnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace forestnav {

std::string to_string(FailureCause c) {
  switch (c) {
    case FailureCause::Tree: return "Tree";
    case FailureCause::Leaves: return "Leaves";
    case FailureCause::NaN_SFC: return "NaN_SFC";
    case FailureCause::Unstable: return "Unstable";
  }
  return "Tree";
}

namespace {

void fill_eq4(MissionMetrics& m) {
  m.v_p2p = m.t_true > 0.0 ? m.d / m.t_true : 0.0;
  m.t_extra = m.v_true > 0.0 ? m.t_true - m.d / m.v_true : m.t_true;
}

bool is_fatal_end(const std::string& reason) {
  return reason == end_reason::kFatalCollision || reason == end_reason::kMotorsOff || reason == end_reason::kTimeout ||
         reason == end_reason::kStuck;
}

}  // namespace

MissionMetrics metrics_from_quantities(double t_true, const Vec3& start, const Vec3& terminal, double v_true) {
  MissionMetrics m;
  m.t_true = t_true;
  m.terminal = terminal;
  m.d = (terminal - start).norm();
  m.v_true = v_true;
  m.path_length = v_true * t_true;
  fill_eq4(m);
  return m;
}

std::vector<Vec3> smooth_path(std::span<const Vec3> points, double dt, double window) {
  const std::size_t n = points.size();
  const auto h = static_cast<std::size_t>(std::floor(0.5 * window / dt + 1e-9));
  std::vector<Vec3> out(points.begin(), points.end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = std::min({h, i, n - 1 - i});
    Vec3 s = Vec3::Zero();
    for (std::size_t j = i - k; j <= i + k; ++j) s += points[j];
    out[i] = s / static_cast<double>(2 * k + 1);
  }
  return out;
}

MissionMetrics compute(const FlightLog& log, const std::optional<Vec3>& goal_override) {
  if (log.ticks.empty() || !log.end) throw std::invalid_argument("metrics need a log with ticks and an end record");
  const EndRecord& end = *log.end;
  const Vec3 goal = goal_override.value_or(end.goal);
  const double dt = log.control_dt();

  MissionMetrics m;
  m.flight_id = log.header.value("flight_id", std::string());
  m.t_true = end.t - log.ticks.front().t;
  m.terminal = end.terminal_estimate;

  std::vector<Vec3> pts;
  pts.reserve(log.ticks.size() + 1);
  for (const auto& tick : log.ticks) pts.push_back(tick.estimate.p);
  pts.push_back(end.terminal_estimate);
  const auto smooth = smooth_path(pts, dt);
  m.path_length = polyline_length(smooth);
  m.d = (end.terminal_estimate - pts.front()).norm();
  m.v_true = m.t_true > 0.0 ? m.path_length / m.t_true : 0.0;
  fill_eq4(m);

  // Leaf activity intervals for the dodge proxy.
  std::vector<std::pair<double, double>> leaf;
  for (const auto& e : log.events()) {
    if (e.type == event::kLeafCloud) leaf.emplace_back(e.t, e.t + e.data.value("lifetime", 1.0));
    if (e.type == event::kCollision) {
      ++m.collisions;
      if (e.data.value("severity", std::string()) == "fatal") m.fatal_collision = true;
    }
  }
  const double dodge_threshold = 0.5 * log.j_max();
  bool dodging = false, stopping = false;
  for (const auto& tick : log.ticks) {
    const bool leaf_active =
        std::any_of(leaf.begin(), leaf.end(), [&](const auto& w) { return tick.t >= w.first && tick.t < w.second; });
    const bool aggressive = leaf_active && tick.command.jerk.norm() > dodge_threshold;
    if (aggressive && !dodging) ++m.leaf_dodges;
    dodging = aggressive;
    const bool estop = tick.command.source == "emergency_stop";
    if (estop) m.emergency_stop_total += dt;
    if (estop && !stopping) ++m.emergency_stops;
    stopping = estop;
  }

  const double dist = (end.terminal_estimate - goal).norm();
  if (!is_fatal_end(end.reason) && !m.fatal_collision)
    m.success = dist <= kGoalTolerance || (end.reason == end_reason::kNoPath && dist <= kNoPathProximity);
  if (!m.success) m.failure_cause = classify_failure(log);
  return m;
}

FailureCause classify_failure(const FlightLog& log) {
  if (!log.end) throw std::invalid_argument("log has no end record");
  const EndRecord& end = *log.end;
  bool fatal_collision = false;
  for (const auto& e : log.events())
    if (e.type == event::kCollision && e.data.value("severity", std::string()) == "fatal") fatal_collision = true;
  if (!is_fatal_end(end.reason) && !fatal_collision) {
    const double dist = (end.terminal_estimate - end.goal).norm();
    if (dist <= kGoalTolerance || (end.reason == end_reason::kNoPath && dist <= kNoPathProximity))
      throw std::logic_error("classify_failure called on a successful mission");
  }

  const double t_fail = end.t;
  bool leaves = false, nan = false;
  for (const auto& e : log.events()) {
    if (e.t > t_fail) continue;
    if (e.type == event::kLeafCloud) {
      const double stop = e.t + e.data.value("lifetime", 1.0);
      if (e.t <= t_fail && stop >= t_fail - kLeafWindow) leaves = true;
    }
    if (e.type == event::kNaNDetected && !e.data.value("recovered", false)) nan = true;
  }
  if (leaves) return FailureCause::Leaves;
  if (nan) return FailureCause::NaN_SFC;

  int run = 0, longest = 0;
  for (const auto& tick : log.ticks) {
    if (tick.t < t_fail - kLeafWindow) continue;
    run = tick.command.source == "fallback_replay" ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  if (longest >= kUnstableRun || end.reason == end_reason::kTimeout) return FailureCause::Unstable;
  return FailureCause::Tree;
}

namespace {

// Order-independent mean: sort first so the floating-point sum does not depend on input order.
double sorted_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

BatchReport aggregate(std::span<const MissionMetrics> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate needs at least one run");
  BatchReport r;
  r.runs = static_cast<int>(runs.size());
  std::vector<double> p2p, vt, te, tt, dd;
  for (const auto& m : runs) {
    r.collisions += m.collisions;
    r.leaf_dodges += m.leaf_dodges;
    r.emergency_stops += m.emergency_stops;
    if (m.fatal_collision) ++r.collision_failures;
    if (m.success) {
      ++r.successes;
      p2p.push_back(m.v_p2p);
      vt.push_back(m.v_true);
      te.push_back(m.t_extra);
      tt.push_back(m.t_true);
      dd.push_back(m.d);
    } else if (m.failure_cause) {
      switch (*m.failure_cause) {
        case FailureCause::Tree: ++r.failures_tree; break;
        case FailureCause::Leaves: ++r.failures_leaves; break;
        case FailureCause::NaN_SFC: ++r.failures_nan; break;
        case FailureCause::Unstable: ++r.failures_unstable; break;
      }
    }
  }
  r.leaf_failures = r.failures_leaves;
  r.success_rate = std::to_string(r.successes) + "/" + std::to_string(r.runs);
  r.mean_v_p2p = sorted_mean(p2p);
  r.mean_v_true = sorted_mean(vt);
  r.mean_t_extra = sorted_mean(te);
  r.mean_t_true = sorted_mean(tt);
  r.mean_d = sorted_mean(dd);
  r.t_extra_from_means = r.mean_v_true > 0.0 ? r.mean_t_true - r.mean_d / r.mean_v_true : 0.0;
  return r;
}

}  // namespace forestnav
