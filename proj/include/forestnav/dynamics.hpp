#pragma once

#include "forestnav/geometry.hpp"

namespace forestnav {

struct DroneState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();

  bool finite() const { return p.allFinite() && v.allFinite() && a.allFinite(); }
};

// Exact constant-jerk propagation of the triple integrator. Both the simulator and the MPC
// prediction model call this function.
inline DroneState propagate(const DroneState& s, const Vec3& jerk, double dt) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  DroneState out;
  out.p = s.p + s.v * dt + s.a * (0.5 * dt2) + jerk * (dt3 / 6.0);
  out.v = s.v + s.a * dt + jerk * (0.5 * dt2);
  out.a = s.a + jerk * dt;
  return out;
}

}  // namespace forestnav
