#pragma once

#include <cstdint>

#include "forestnav/flight_log.hpp"
#include "forestnav/forest.hpp"
#include "forestnav/scenario.hpp"

namespace forestnav {

// Per-flight seed: scenario seed xor flight index.
inline std::uint64_t flight_seed(const ScenarioConfig& cfg, int flight_index) {
  return cfg.seed ^ static_cast<std::uint64_t>(flight_index);
}

// One closed-loop flight: sense, map, plan, corridor, control, integrate, at the configured rates,
// until the goal is reached, a fatal event occurs, the planner gives up, or the timeout expires.
FlightLog run_mission(const ScenarioConfig& cfg, int flight_index);

// Same, with a pre-generated scene (must come from forest_params(cfg)).
FlightLog run_mission(const ScenarioConfig& cfg, const ForestScene& scene, int flight_index);

}  // namespace forestnav
