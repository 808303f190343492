#include "forestnav/scenario.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace forestnav {

using nlohmann::json;

std::string to_string(Variant v) { return v == Variant::Original ? "original" : "optimized"; }

Variant variant_from_string(const std::string& s) {
  if (s == "original") return Variant::Original;
  if (s == "optimized") return Variant::Optimized;
  throw std::invalid_argument("unknown variant: " + s);
}

VariantSwitches switches_for(Variant v) {
  if (v == Variant::Original) return VariantSwitches{false, false, false, false, 30.0};
  return VariantSwitches{true, true, true, true, 3.0};
}

VariantSwitches ScenarioConfig::switches() const {
  VariantSwitches s = switches_for(variant);
  if (forgetting_override) s.forgetting_threshold = *forgetting_override;
  return s;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 rotate_z(const Vec3& v, double yaw_rad) {
  const double c = std::cos(yaw_rad), s = std::sin(yaw_rad);
  return Vec3(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("scenario: " + msg);
}

// Reads known keys from a JSON object and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) throw std::invalid_argument("scenario: unknown key '" + k + "' in " + where_);
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("scenario: bad value for " + where_ + "." + key + ": " + e.what());
    }
  }
  void vec(const char* key, Vec3& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& a = j_.at(key);
    require(a.is_array() && a.size() == 3, where_ + "." + key + " must be a 3-vector");
    out = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json v3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

Vec3 ScenarioConfig::nominal_goal() const {
  return mission.start + rotate_z(mission.goal_offset, mission.start_yaw_deg * kDeg);
}

MapConfig ScenarioConfig::map_config() const {
  MapConfig m;
  m.resolution = map_resolution;
  m.inflation_radius = inflation_radius;
  m.forgetting_threshold = switches().forgetting_threshold;
  // The map is a flight band between map_floor and map_top above the ground; returns outside it
  // (the ground itself included) are dropped, and the planner cannot route below the floor.
  m.origin = Vec3(forest.bounds.lo.x(), forest.bounds.lo.y(), lidar.ground_z + sim.map_floor);
  const Vec3 extent(forest.bounds.hi.x() - forest.bounds.lo.x(), forest.bounds.hi.y() - forest.bounds.lo.y(),
                    sim.map_top - sim.map_floor);
  for (int i = 0; i < 3; ++i) m.dims[i] = static_cast<int>(std::ceil(extent[i] / map_resolution - 1e-9));
  return m;
}

void ScenarioConfig::validate() const {
  require(mission.repeats >= 1, "mission.repeats must be >= 1");
  require(mission.v_target > 0.0, "mission.v_target must be positive");
  require(mission.timeout > 0.0, "mission.timeout must be positive");
  require(mission.goal_reached_radius > 0.0, "mission.goal_reached_radius must be positive");
  require(std::abs(mission.start_tilt_deg) < 45.0, "mission.start_tilt_deg must be below 45 degrees");
  require(mission.heading_jitter_deg >= 0.0, "mission.heading_jitter_deg must be >= 0");
  require(forest.density > 0.0, "forest.density must be positive");
  require(forest.bounds.area_xy() >= 100.0, "forest bounds must cover at least 100 m^2");
  const Vec3 goal = nominal_goal();
  const double reach = mission.goal_offset.norm() * std::sin(mission.heading_jitter_deg * kDeg);
  auto inside_xy = [&](const Vec3& p, double margin) {
    return p.x() - margin >= forest.bounds.lo.x() && p.x() + margin <= forest.bounds.hi.x() &&
           p.y() - margin >= forest.bounds.lo.y() && p.y() + margin <= forest.bounds.hi.y();
  };
  require(inside_xy(mission.start, 0.0), "start must lie inside the forest bounds");
  require(inside_xy(goal, reach), "goal (including heading jitter) must lie inside the forest bounds");
  require(sim.map_floor >= 0.0 && sim.map_top > sim.map_floor + map_resolution, "sim.map_top must exceed sim.map_floor");
  const double floor_z = lidar.ground_z + sim.map_floor, top_z = lidar.ground_z + sim.map_top;
  require(goal.z() > floor_z && goal.z() < top_z, "goal height must lie inside the map");
  require(mission.start.z() > floor_z && mission.start.z() < top_z, "start height must lie inside the map");
  require(nan.rate_per_minute >= 0.0 && nan.window > 0.0, "nan_injection rate must be >= 0 and window > 0");
  require(sim.sim_dt > 0.0 && sim.control_dt > 0.0, "time steps must be positive");
  const double ratio = sim.control_dt / sim.sim_dt;
  require(std::abs(ratio - std::round(ratio)) < 1e-9, "control_dt must be a multiple of sim_dt");
  const double lratio = 1.0 / (lidar.rate_hz * sim.control_dt);
  require(lratio >= 1.0 - 1e-9 && std::abs(lratio - std::round(lratio)) < 1e-9,
          "lidar period must be a multiple of control_dt");
  require(sim.drone_radius > 0.0, "sim.drone_radius must be positive");
  require(sim.planner_budget >= 1, "sim.planner_budget must be >= 1");
  require(sim.replan_interval >= 1, "sim.replan_interval must be >= 1");
  require(map_resolution > 0.0 && inflation_radius >= 0.0, "map resolution must be positive");
  require(!forgetting_override || *forgetting_override > 0.0, "map.forgetting_threshold must be positive");
  require(planner.w >= 0.0 && planner.d_follow > 0.0, "planner weights must be non-negative");
  require(corridor.shrink >= 0.0 && corridor.max_growth > 0.0, "corridor parameters must be positive");
  lidar.validate();
  mpc.validate();
}

json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["variant"] = to_string(variant);
  j["forest"] = {{"density", forest.density},
                 {"branch_level", to_string(forest.branch_level)},
                 {"bounds", {{"lo", v3(forest.bounds.lo)}, {"hi", v3(forest.bounds.hi)}}},
                 {"seed", forest.seed},
                 {"clearing_radius", forest.clearing_radius}};
  j["mission"] = {{"start", v3(mission.start)},
                  {"start_yaw_deg", mission.start_yaw_deg},
                  {"goal_offset", v3(mission.goal_offset)},
                  {"v_target", mission.v_target},
                  {"repeats", mission.repeats},
                  {"heading_jitter_deg", mission.heading_jitter_deg},
                  {"timeout", mission.timeout},
                  {"goal_reached_radius", mission.goal_reached_radius},
                  {"start_tilt_deg", mission.start_tilt_deg},
                  {"stuck_timeout", mission.stuck_timeout}};
  j["leaf_profile"] = to_string(leaf_profile);
  j["nan_injection"] = {{"rate_per_minute", nan.rate_per_minute}, {"window", nan.window}, {"fixed_times", nan.fixed_times}};
  j["odometry"] = {{"position_noise_sd", odometry.position_noise_sd},
                   {"drift_sd", odometry.drift_sd},
                   {"drift_bound", odometry.drift_bound}};
  j["sim"] = {{"sim_dt", sim.sim_dt},
              {"control_dt", sim.control_dt},
              {"drone_radius", sim.drone_radius},
              {"imu_noise_sd", sim.imu_noise_sd},
              {"leaf_lifetime", sim.leaf_lifetime},
              {"planner_budget", sim.planner_budget},
              {"replan_interval", sim.replan_interval},
              {"map_floor", sim.map_floor},
              {"map_top", sim.map_top},
              {"log_geometry", sim.log_geometry}};
  j["lidar"] = {{"rays_per_scan", lidar.rays_per_scan},
                {"elevation_min_deg", lidar.elevation_min_deg},
                {"elevation_max_deg", lidar.elevation_max_deg},
                {"range", lidar.range},
                {"rate_hz", lidar.rate_hz},
                {"range_noise_sd", lidar.range_noise_sd}};
  j["map"] = {{"resolution", map_resolution},
              {"inflation_radius", inflation_radius},
              {"forgetting_threshold", forgetting_override ? json(*forgetting_override) : json(nullptr)}};
  j["planner"] = {{"w", planner.w}, {"d_follow", planner.d_follow}, {"restrict_fraction", planner.restrict_fraction}};
  j["corridor"] = {{"shrink", corridor.shrink},
                   {"max_growth", corridor.max_growth},
                   {"min_half_width", corridor.min_half_width}};
  j["mpc"] = {{"horizon", mpc.horizon},
              {"dt", mpc.dt},
              {"r_u", v3(mpc.r_u)},
              {"r_p", v3(mpc.r_p)},
              {"r_v", v3(mpc.r_v)},
              {"r_a", v3(mpc.r_a)},
              {"r_p_terminal", v3(mpc.r_p_terminal)},
              {"r_v_terminal", v3(mpc.r_v_terminal)},
              {"r_a_terminal", v3(mpc.r_a_terminal)},
              {"r_c", v3(mpc.r_c)},
              {"v_min", v3(mpc.v_min)},
              {"v_max", v3(mpc.v_max)},
              {"a_min", v3(mpc.a_min)},
              {"a_max", v3(mpc.a_max)},
              {"j_min", v3(mpc.j_min)},
              {"j_max", v3(mpc.j_max)},
              {"arrival_radius", mpc.arrival_radius},
              {"stop_box_half_extent", mpc.stop_box_half_extent}};
  j["solver"] = {{"rho", solver.rho},
                 {"sigma", solver.sigma},
                 {"alpha", solver.alpha},
                 {"eps_abs", solver.eps_abs},
                 {"eps_rel", solver.eps_rel},
                 {"max_iter", solver.max_iter},
                 {"adaptive_rho", solver.adaptive_rho},
                 {"polish", solver.polish}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig c;
  Reader top(j, "scenario");
  top.get("name", c.name);
  top.get("seed", c.seed);
  if (const json* v = top.child("variant")) c.variant = variant_from_string(v->get<std::string>());
  if (const json* v = top.child("leaf_profile")) c.leaf_profile = leaf_profile_from_string(v->get<std::string>());

  if (const json* f = top.child("forest")) {
    Reader r(*f, "forest");
    r.get("density", c.forest.density);
    if (const json* b = r.child("branch_level")) c.forest.branch_level = branch_level_from_string(b->get<std::string>());
    r.get("seed", c.forest.seed);
    r.get("clearing_radius", c.forest.clearing_radius);
    if (const json* b = r.child("bounds")) {
      Reader rb(*b, "forest.bounds");
      rb.vec("lo", c.forest.bounds.lo);
      rb.vec("hi", c.forest.bounds.hi);
    }
  }
  if (const json* m = top.child("mission")) {
    Reader r(*m, "mission");
    r.vec("start", c.mission.start);
    r.get("start_yaw_deg", c.mission.start_yaw_deg);
    r.vec("goal_offset", c.mission.goal_offset);
    r.get("v_target", c.mission.v_target);
    r.get("repeats", c.mission.repeats);
    r.get("heading_jitter_deg", c.mission.heading_jitter_deg);
    r.get("timeout", c.mission.timeout);
    r.get("goal_reached_radius", c.mission.goal_reached_radius);
    r.get("start_tilt_deg", c.mission.start_tilt_deg);
    r.get("stuck_timeout", c.mission.stuck_timeout);
  }
  if (const json* n = top.child("nan_injection")) {
    Reader r(*n, "nan_injection");
    r.get("rate_per_minute", c.nan.rate_per_minute);
    r.get("window", c.nan.window);
    r.get("fixed_times", c.nan.fixed_times);
  }
  if (const json* o = top.child("odometry")) {
    Reader r(*o, "odometry");
    r.get("position_noise_sd", c.odometry.position_noise_sd);
    r.get("drift_sd", c.odometry.drift_sd);
    r.get("drift_bound", c.odometry.drift_bound);
  }
  if (const json* o = top.child("sim")) {
    Reader r(*o, "sim");
    r.get("sim_dt", c.sim.sim_dt);
    r.get("control_dt", c.sim.control_dt);
    r.get("drone_radius", c.sim.drone_radius);
    r.get("imu_noise_sd", c.sim.imu_noise_sd);
    r.get("leaf_lifetime", c.sim.leaf_lifetime);
    r.get("planner_budget", c.sim.planner_budget);
    r.get("replan_interval", c.sim.replan_interval);
    r.get("map_floor", c.sim.map_floor);
    r.get("map_top", c.sim.map_top);
    r.get("log_geometry", c.sim.log_geometry);
  }
  if (const json* o = top.child("lidar")) {
    Reader r(*o, "lidar");
    r.get("rays_per_scan", c.lidar.rays_per_scan);
    r.get("elevation_min_deg", c.lidar.elevation_min_deg);
    r.get("elevation_max_deg", c.lidar.elevation_max_deg);
    r.get("range", c.lidar.range);
    r.get("range_noise_sd", c.lidar.range_noise_sd);
    r.get("rate_hz", c.lidar.rate_hz);
  }
  if (const json* o = top.child("map")) {
    Reader r(*o, "map");
    r.get("resolution", c.map_resolution);
    r.get("inflation_radius", c.inflation_radius);
    if (const json* f = r.child("forgetting_threshold"); f && !f->is_null()) c.forgetting_override = f->get<double>();
  }
  if (const json* o = top.child("planner")) {
    Reader r(*o, "planner");
    r.get("w", c.planner.w);
    r.get("d_follow", c.planner.d_follow);
    r.get("restrict_fraction", c.planner.restrict_fraction);
  }
  if (const json* o = top.child("corridor")) {
    Reader r(*o, "corridor");
    r.get("shrink", c.corridor.shrink);
    r.get("max_growth", c.corridor.max_growth);
    r.get("min_half_width", c.corridor.min_half_width);
  }
  if (const json* o = top.child("mpc")) {
    Reader r(*o, "mpc");
    r.get("horizon", c.mpc.horizon);
    r.get("dt", c.mpc.dt);
    r.vec("r_u", c.mpc.r_u);
    r.vec("r_p", c.mpc.r_p);
    r.vec("r_v", c.mpc.r_v);
    r.vec("r_a", c.mpc.r_a);
    r.vec("r_p_terminal", c.mpc.r_p_terminal);
    r.vec("r_v_terminal", c.mpc.r_v_terminal);
    r.vec("r_a_terminal", c.mpc.r_a_terminal);
    r.vec("r_c", c.mpc.r_c);
    r.vec("v_min", c.mpc.v_min);
    r.vec("v_max", c.mpc.v_max);
    r.vec("a_min", c.mpc.a_min);
    r.vec("a_max", c.mpc.a_max);
    r.vec("j_min", c.mpc.j_min);
    r.vec("j_max", c.mpc.j_max);
    r.get("arrival_radius", c.mpc.arrival_radius);
    r.get("stop_box_half_extent", c.mpc.stop_box_half_extent);
  }
  if (const json* o = top.child("solver")) {
    Reader r(*o, "solver");
    r.get("rho", c.solver.rho);
    r.get("sigma", c.solver.sigma);
    r.get("alpha", c.solver.alpha);
    r.get("eps_abs", c.solver.eps_abs);
    r.get("eps_rel", c.solver.eps_rel);
    r.get("max_iter", c.solver.max_iter);
    r.get("adaptive_rho", c.solver.adaptive_rho);
    r.get("polish", c.solver.polish);
  }
  return c;
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario: invalid JSON: ") + e.what());
  }
  return from_json(j);
}

ForestParams forest_params(const ScenarioConfig& cfg) {
  ForestParams p;
  p.density = cfg.forest.density;
  p.branch_level = cfg.forest.branch_level;
  p.bounds = cfg.forest.bounds;
  p.seed = cfg.forest.seed;
  p.clearing_radius = cfg.forest.clearing_radius;
  p.clearings = {cfg.mission.start, cfg.nominal_goal()};
  return p;
}

}  // namespace forestnav
