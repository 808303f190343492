#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace forestnav::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// minimize 0.5 x'Px + q'x  subject to  lower <= Ax <= upper.
// One-sided rows use +/-infinity (anything beyond +/-kInfinity is treated as unbounded).
struct QuadProgram {
  MatrixXd P;
  VectorXd q;
  MatrixXd A;
  VectorXd lower;
  VectorXd upper;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_constraints() const { return A.rows(); }
  double objective(const VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

inline constexpr double kInfinity = 1e20;

// Throws std::invalid_argument when dimensions disagree, P is not symmetric, bounds cross,
// or any entry is NaN.
void validate(const QuadProgram& prob);

struct Settings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-4;
  double eps_rel = 1e-4;
  double eps_prim_inf = 1e-5;
  double eps_dual_inf = 1e-5;
  int max_iter = 4000;
  int check_interval = 5;
  bool adaptive_rho = true;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iters = 10;
  bool polish = true;
  int polish_refine_iter = 3;
  bool record_history = false;
};

struct WarmStart {
  VectorXd x;
  VectorXd y;
};

enum class Status : std::uint8_t { Solved, MaxIter, Infeasible };

std::string to_string(Status s);

struct Result {
  Status status = Status::MaxIter;
  VectorXd x;
  VectorXd y;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;
  std::vector<double> merit_history;  // max normalized residual at each termination check
};

Result solve(const QuadProgram& prob, const std::optional<WarmStart>& warm = std::nullopt,
             const Settings& settings = {});

}  // namespace forestnav::qp
