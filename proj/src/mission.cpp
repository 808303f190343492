#include "forestnav/mission.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Geometry>

#include "forestnav/corridor.hpp"
#include "forestnav/lidar.hpp"
#include "forestnav/mpc.hpp"
#include "forestnav/occupancy_map.hpp"
#include "forestnav/planner.hpp"
#include "forestnav/sim_world.hpp"

namespace forestnav {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 rotate_z(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
}

// The part of a path still ahead of p: the projection of p followed by the remaining vertices.
ReferencePath trim_path(const ReferencePath& path, const Vec3& p) {
  const auto& w = path.waypoints;
  double best = std::numeric_limits<double>::infinity();
  std::size_t seg = 0;
  Vec3 foot = w.front();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const auto pr = project_to_segment(p, w[i], w[i + 1]);
    if (pr.distance < best) {
      best = pr.distance;
      seg = i;
      foot = pr.point;
    }
  }
  ReferencePath out;
  out.created_at = path.created_at;
  out.waypoints.push_back(foot);
  for (std::size_t i = seg + 1; i < w.size(); ++i)
    if ((w[i] - out.waypoints.back()).norm() > 1e-6) out.waypoints.push_back(w[i]);
  return out;
}

json polys_json(const Corridor& c) {
  json out = json::array();
  for (const auto& poly : c.polys) {
    json rows = json::array();
    for (const auto& h : poly.planes()) rows.push_back({h.normal.x(), h.normal.y(), h.normal.z(), h.offset});
    out.push_back(std::move(rows));
  }
  return out;
}

json path_json(const ReferencePath& p) {
  json out = json::array();
  for (const auto& w : p.waypoints) out.push_back(vec_to_json(w));
  return out;
}

Aabb world_clip(const MapConfig& m, const EstimateFrame& frame) {
  const Vec3 lo = m.origin;
  const Vec3 hi = m.origin + Vec3(m.dims[0], m.dims[1], m.dims[2]) * m.resolution;
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
    const Vec3 w = frame.point_to_world(corner);
    box.lo = box.lo.cwiseMin(w);
    box.hi = box.hi.cwiseMax(w);
  }
  return box;
}

}  // namespace

FlightLog run_mission(const ScenarioConfig& cfg, int flight_index) {
  cfg.validate();
  const ForestScene scene = generate_forest(forest_params(cfg));
  return run_mission(cfg, scene, flight_index);
}

FlightLog run_mission(const ScenarioConfig& cfg, const ForestScene& scene, int flight_index) {
  cfg.validate();
  const VariantSwitches sw = cfg.switches();
  const std::uint64_t seed = flight_seed(cfg, flight_index);
  Rng rng(mix_seed(seed));

  const double jitter = cfg.mission.heading_jitter_deg;
  const double yaw = (cfg.mission.start_yaw_deg + (jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0)) * kDeg;
  const Vec3 start = cfg.mission.start;
  // The operator commands the goal in the frame the stack estimates in.
  const Vec3 goal = start + rotate_z(cfg.mission.goal_offset, yaw);

  // Airframe pitched nose-up on the takeoff spot. Without gravity alignment the estimate frame is
  // that tilted body frame.
  const Eigen::Matrix3d world_from_body =
      Eigen::AngleAxisd(-cfg.mission.start_tilt_deg * kDeg, Vec3::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d body_from_world = world_from_body.transpose();
  EstimateFrame frame;
  frame.anchor = start;
  if (sw.gravity_init) {
    Rng imu(mix_seed(seed ^ 0x696d75ULL));
    const auto samples = sample_accelerometer(body_from_world, cfg.sim.imu_noise_sd, kGravitySamples, imu);
    frame.R = level_rotation(gravity_init(samples)) * body_from_world;
  } else {
    frame.R = body_from_world;
  }

  Odometry odom(cfg.odometry, seed, frame);
  Lidar lidar(scene, cfg.lidar, seed);
  SceneIndex index(scene);
  const MapConfig map_cfg = cfg.map_config();
  VoxelMap map(map_cfg);
  const Aabb clip = world_clip(map_cfg, frame);
  AStarPlanner planner(map);
  mpc::Controller controller(cfg.mpc, cfg.solver);

  const auto leaves = spawn_leaf_events(cfg.leaf_profile, seed, cfg.mission.timeout, cfg.sim.leaf_lifetime);
  std::vector<double> nan_times;
  {
    Rng nrng(mix_seed(seed ^ 0x6e616eULL));
    nan_times = poisson_schedule(cfg.nan.rate_per_minute / 60.0, cfg.mission.timeout, nrng);
    nan_times.insert(nan_times.end(), cfg.nan.fixed_times.begin(), cfg.nan.fixed_times.end());
  }
  auto nan_active = [&](double t) {
    for (double s : nan_times)
      if (t >= s && t < s + cfg.nan.window) return true;
    return false;
  };

  FlightLog log;
  log.header = {{"flight_id", cfg.name + "#" + std::to_string(flight_index)},
                {"scenario", cfg.name},
                {"variant", to_string(cfg.variant)},
                {"flight_index", flight_index},
                {"seed", seed},
                {"control_dt", cfg.sim.control_dt},
                {"j_max", cfg.mpc.j_max.cwiseAbs().maxCoeff()},
                {"v_target", cfg.mission.v_target},
                {"start", vec_to_json(start)},
                {"goal", vec_to_json(goal)},
                {"goal_world", vec_to_json(goal)},
                {"heading_deg", yaw / kDeg},
                {"start_tilt_deg", cfg.mission.start_tilt_deg},
                {"gravity_init", sw.gravity_init},
                {"forest_density", scene.density},
                {"realized_density", scene.realized_density()},
                {"tree_count", scene.trees.size()},
                {"config", cfg.to_json()}};

  const int substeps = static_cast<int>(std::lround(cfg.sim.control_dt / cfg.sim.sim_dt));
  const long lidar_every = std::lround(1.0 / (cfg.lidar.rate_hz * cfg.sim.control_dt));
  const std::uint64_t budget = cfg.sim.planner_budget;
  const double dt = cfg.sim.control_dt;

  DroneState truth{start, Vec3::Zero(), Vec3::Zero()};
  std::optional<ReferencePath> path;
  std::optional<SearchState> pending;
  Vec3 goal_cur = goal;
  long nopath_ticks = 0;
  bool in_contact = false;
  std::size_t next_leaf = 0;
  std::vector<std::pair<LeafCloudEvent, std::vector<Vec3>>> placed;

  auto finish = [&](double t, const char* reason, const DroneState& est) {
    log.end = EndRecord{t, reason, truth.p, est.p, goal_cur};
  };

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    TickRecord rec;
    rec.t = t;
    rec.truth = truth;
    rec.command.source = "none";

    // Transient leaf clouds attach to the drone when they trigger.
    while (next_leaf < leaves.size() && leaves[next_leaf].trigger_time <= t) {
      const LeafCloudEvent& e = leaves[next_leaf++];
      const Vec3 center = truth.p + e.offset;
      placed.emplace_back(e, leaf_cloud_points(e, center));
      rec.events.push_back(LogEvent{event::kLeafCloud, e.trigger_time,
                                    {{"lifetime", e.lifetime}, {"center", vec_to_json(center)},
                                     {"voxel_count", e.voxel_count}}});
    }

    if (k % lidar_every == 0) {
      std::vector<Vec3> extra;
      for (const auto& [e, pts] : placed)
        if (e.active(t)) extra.insert(extra.end(), pts.begin(), pts.end());
      auto pts = lidar.scan(truth.p, static_cast<std::uint64_t>(k / lidar_every), clip, extra);
      for (auto& p : pts) p = frame.point_to_estimate(p);
      map.integrate_scan(pts, t);
    }

    const DroneState est = odom.estimate(truth, t);
    rec.estimate = est;

    if (t >= cfg.mission.timeout - 1e-9) {
      log.ticks.push_back(std::move(rec));
      finish(t, end_reason::kTimeout, est);
      break;
    }
    if ((est.p - goal_cur).norm() <= cfg.mission.goal_reached_radius) {
      log.ticks.push_back(std::move(rec));
      finish(t, end_reason::kGoalReached, est);
      break;
    }

    // Plan.
    bool hold = false;
    std::string hold_reason;
    bool fresh = false;
    bool ended = false;
    const bool replan = k % cfg.sim.replan_interval == 0 || !path || pending.has_value();
    rec.plan_status = replan ? "skipped" : "reused";
    if (replan) {
      Vec3 g = goal_cur;
      try {
        g = reposition_goal(map, goal, t);
      } catch (const NoFreeVoxel&) {
      } catch (const OutOfBounds&) {
      }
      if ((g - goal_cur).norm() > 1e-12) {
        rec.events.push_back(LogEvent{event::kGoalRepositioned, t, {{"from", vec_to_json(goal_cur)}, {"to", vec_to_json(g)}}});
        goal_cur = g;
      }

      std::optional<Vec3> plan_start;
      if (auto sv = map.try_world_to_voxel(est.p)) {
        plan_start = est.p;
        if (map.is_blocked(*sv, t)) {
          try {
            plan_start = map.voxel_to_world(map.nearest_free(*sv, t));
            rec.events.push_back(LogEvent{event::kStartMoved, t, {{"from", vec_to_json(est.p)}, {"to", vec_to_json(*plan_start)}}});
          } catch (const NoFreeVoxel&) {
            plan_start.reset();
          }
        }
      }

      if (!plan_start || (*plan_start - goal_cur).norm() < 1e-9) {
        rec.plan_status = "skipped";
        rec.events.push_back(LogEvent{event::kPlanFailed, t, {{"reason", plan_start ? "at_goal" : "start_unavailable"}}});
        hold = true;
        hold_reason = "plan_failed";
        pending.reset();
      } else {
        PlanResult res;
        if (pending) {
          SearchState s = std::move(*pending);
          pending.reset();
          res = planner.resume(std::move(s), budget);
        } else {
          PlanRequest req;
          req.start = *plan_start;
          req.goal = goal_cur;
          req.params = cfg.planner;
          req.t = t;
          if (sw.path_following && path && path->waypoints.size() >= 2) req.previous = *path;
          res = planner.plan(req, budget);
        }
        rec.expansions = res.expansions;
        switch (res.status) {
          case PlanResult::Status::Path:
            path = std::move(*res.path);
            path->created_at = t;
            fresh = true;
            nopath_ticks = 0;
            rec.plan_status = "path";
            break;
          case PlanResult::Status::BudgetExceeded:
            rec.plan_status = "budget_exceeded";
            rec.events.push_back(LogEvent{event::kBudgetExceeded, t, {{"expansions", res.expansions}}});
            if (sw.resumable_search) {
              pending = std::move(res.state);
              hold = true;
              hold_reason = "budget";
            } else {
              rec.events.push_back(LogEvent{event::kPlanFailed, t, {{"reason", "budget"}}});
            }
            break;
          case PlanResult::Status::NoPath:
            rec.plan_status = "no_path";
            rec.events.push_back(LogEvent{event::kNoPath, t, json::object()});
            if ((est.p - goal_cur).norm() <= 3.0) {
              log.ticks.push_back(std::move(rec));
              finish(t, end_reason::kNoPath, est);
              ended = true;
              break;
            }
            ++nopath_ticks;
            hold = true;
            hold_reason = "no_path";
            break;
        }
      }
    }
    if (ended) break;
    if (static_cast<double>(nopath_ticks) * dt >= cfg.mission.stuck_timeout) {
      log.ticks.push_back(std::move(rec));
      finish(t, end_reason::kStuck, est);
      break;
    }

    // Corridor.
    std::optional<ReferencePath> active;
    std::optional<Corridor> corridor;
    if (!hold && path) {
      active = fresh ? *path : trim_path(*path, est.p);
      CorridorConfig cc = cfg.corridor;
      cc.inject_nan = nan_active(t);
      try {
        if (active->waypoints.size() < 2) throw DegenerateSegment();
        corridor = generate_corridor(map, *active, t, cc);
      } catch (const NaNDetected&) {
        rec.events.push_back(LogEvent{event::kNaNDetected, t, {{"recovered", sw.nan_recovery}}});
        if (!sw.nan_recovery) {
          rec.events.push_back(LogEvent{event::kMotorsOff, t, json::object()});
          rec.command.source = "motors_off";
          log.ticks.push_back(std::move(rec));
          finish(t, end_reason::kMotorsOff, est);
          break;
        }
        hold = true;
        hold_reason = "nan";
      } catch (const std::invalid_argument&) {
        rec.events.push_back(LogEvent{event::kPlanFailed, t, {{"reason", "corridor"}}});
        hold = true;
        hold_reason = "corridor";
      }
    }
    if (!path && !hold) {
      hold = true;
      hold_reason = "no_path_yet";
    }
    if (hold) rec.events.push_back(LogEvent{event::kEmergencyStop, t, {{"reason", hold_reason}}});

    // Control.
    mpc::TickInput input;
    input.v_target = cfg.mission.v_target;
    input.emergency_stop = hold;
    if (!hold) {
      input.path = &*active;
      input.corridor = &*corridor;
    }
    const mpc::ControlCommand cmd = controller.step(est, input);
    if (cmd.cache_exhausted) rec.events.push_back(LogEvent{event::kUnstableFlight, t, json::object()});
    rec.command.jerk = cmd.jerk;
    rec.command.source = mpc::to_string(cmd.source);
    rec.command.replay_age = cmd.replay_age;
    rec.command.solver_status = qp::to_string(cmd.solver_status);
    rec.command.iterations = cmd.solver_iterations;
    rec.command.primal_residual = cmd.primal_residual;
    rec.command.dual_residual = cmd.dual_residual;

    if (cfg.sim.log_geometry) {
      rec.geometry = json::object();
      if (fresh) rec.geometry["path"] = path_json(*path);
      if (corridor) rec.geometry["corridor"] = polys_json(*corridor);
    }

    // Integrate at the simulation rate with collision checks.
    const Vec3 jerk_world = frame.vector_to_world(cmd.jerk);
    bool fatal = false;
    double t_fatal = t;
    for (int s = 0; s < substeps; ++s) {
      truth = step_dynamics(truth, jerk_world, cfg.sim.sim_dt);
      const double ts = t + (s + 1) * cfg.sim.sim_dt;
      const auto contact = check_collision(truth.p, index, cfg.sim.drone_radius, cfg.lidar.ground_z);
      if (!contact) {
        in_contact = false;
        continue;
      }
      const json data = {{"severity", contact->severity == Severity::Fatal ? "fatal" : "minor"},
                         {"ground", contact->ground},
                         {"tree", contact->tree},
                         {"branch", contact->branch}};
      if (contact->severity == Severity::Fatal) {
        rec.events.push_back(LogEvent{event::kCollision, ts, data});
        fatal = true;
        t_fatal = ts;
        break;
      }
      if (!in_contact) rec.events.push_back(LogEvent{event::kCollision, ts, data});
      in_contact = true;
    }
    log.ticks.push_back(std::move(rec));
    if (fatal) {
      finish(t_fatal, end_reason::kFatalCollision, odom.estimate(truth, t_fatal));
      break;
    }
  }
  return log;
}

}  // namespace forestnav
