#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "forestnav/corridor.hpp"
#include "forestnav/dynamics.hpp"
#include "forestnav/planner.hpp"
#include "forestnav/qp_solver.hpp"

namespace forestnav::mpc {

struct MpcParams {
  int horizon = 15;
  double dt = 0.1;
  // Diagonal weights of the tracking cost.
  Vec3 r_u = Vec3::Zero();
  Vec3 r_p = Vec3::Constant(2500.0);
  Vec3 r_v = Vec3::Zero();
  Vec3 r_a = Vec3::Zero();
  Vec3 r_p_terminal = Vec3::Constant(3500.0);
  Vec3 r_v_terminal = Vec3::Constant(200.0);
  Vec3 r_a_terminal = Vec3::Constant(200.0);
  Vec3 r_c = Vec3::Constant(1.0);
  Vec3 v_min = Vec3::Constant(-10.0);
  Vec3 v_max = Vec3::Constant(10.0);
  Vec3 a_min = Vec3(-20.0, -20.0, -9.5);
  Vec3 a_max = Vec3::Constant(20.0);
  Vec3 j_min = Vec3::Constant(-50.0);
  Vec3 j_max = Vec3::Constant(50.0);
  double arrival_radius = 0.5;   // v_ref clamps to zero this close to the final waypoint
  double stop_box_half_extent = 1.0;

  void validate() const;
};

struct Reference {
  std::vector<Vec3> p;          // p_ref[1..N]
  std::vector<Vec3> v;          // v_ref[1..N]
  std::vector<double> arclength;
};

Reference sample_reference(const ReferencePath& path, const DroneState& state, double v_target,
                           const MpcParams& params);

// Reference that holds the current position with zero velocity.
Reference stop_reference(const DroneState& state, const MpcParams& params);

// Per-step polyhedron selection for the position constraints.
struct StepConstraints {
  std::vector<const Polyhedron*> polys;  // size N, entry n-1 constrains p_n
  std::vector<int> poly_index;
};

StepConstraints assign_corridor(const Corridor& corridor, const Reference& ref);
// The result points at `poly`, which must outlive it.
StepConstraints single_polyhedron(const Polyhedron& poly, int horizon);
StepConstraints single_polyhedron(Polyhedron&&, int) = delete;

// Predicted states x_1..x_N from repeated calls to propagate().
std::vector<DroneState> predict(const DroneState& x0, const std::vector<Vec3>& jerks, double dt);

struct Problem {
  qp::QuadProgram qp;
  double constant = 0.0;  // cost terms independent of the inputs
  Eigen::Index velocity_rows = 0;
  Eigen::Index acceleration_rows = 0;
  Eigen::Index jerk_rows = 0;
  Eigen::Index corridor_rows = 0;
};

// Condensed QP over stacked jerks u_0..u_{N-1} (index 3k + axis). Throws std::invalid_argument
// on non-finite inputs.
Problem build_problem(const DroneState& state, const Reference& ref, const StepConstraints& constraints,
                      const MpcParams& params);

// Full tracking cost of a jerk sequence, evaluated by forward simulation.
double evaluate_cost(const DroneState& state, const Reference& ref, const std::vector<Vec3>& jerks,
                     const MpcParams& params);

std::vector<Vec3> unstack(const Eigen::VectorXd& u);

enum class CommandSource : std::uint8_t { Solved, FallbackReplay, EmergencyStop };

std::string to_string(CommandSource s);

struct ControlCommand {
  Vec3 jerk = Vec3::Zero();
  CommandSource source = CommandSource::Solved;
  int replay_age = 0;           // index into the cached sequence; -1 once the cache is exhausted
  qp::Status solver_status = qp::Status::Solved;
  int solver_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool cache_exhausted = false;
  bool emergency_solve_failed = false;
};

struct TickInput {
  const ReferencePath* path = nullptr;
  const Corridor* corridor = nullptr;
  bool emergency_stop = false;
  double v_target = 1.0;
};

// Receding-horizon controller with last-valid-sequence fallback.
class Controller {
 public:
  explicit Controller(MpcParams params, qp::Settings solver = {});

  ControlCommand step(const DroneState& state, const TickInput& input);

  const MpcParams& params() const { return params_; }
  const std::vector<Vec3>& cached_sequence() const { return cached_; }
  int cache_age() const { return age_; }
  void reset();

 private:
  ControlCommand solve_and_emit(const DroneState& state, const Reference& ref, const StepConstraints& cons,
                                CommandSource source);
  ControlCommand fallback(const qp::Result& failed);

  MpcParams params_;
  qp::Settings solver_;
  std::vector<Vec3> cached_;
  int age_ = 0;
  std::optional<qp::WarmStart> warm_;
};

}  // namespace forestnav::mpc
