#include "forestnav/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace forestnav::qp {
namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kEqualityTol = 1e-4;
constexpr double kDivisionTol = 1e-20;
constexpr int kAdaptiveRhoInterval = 25;
constexpr double kPolishDelta = 1e-6;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double safe_scale(double norm) {
  if (norm < kMinScaling) return 1.0;
  return 1.0 / std::sqrt(std::min(norm, kMaxScaling));
}

// Ruiz equilibration of the KKT matrix plus cost scaling:
// P_s = c D P D, q_s = c D q, A_s = E A D, bounds_s = E bounds.
struct Scaled {
  MatrixXd P;
  VectorXd q;
  MatrixXd A;
  VectorXd l;
  VectorXd u;
  VectorXd D;
  VectorXd E;
  double c = 1.0;
};

Scaled scale_problem(const QuadProgram& prob, int iters) {
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_constraints();
  Scaled s;
  s.P = prob.P;
  s.q = prob.q;
  s.A = prob.A;
  s.D = VectorXd::Ones(n);
  s.E = VectorXd::Ones(m);
  for (int it = 0; it < iters; ++it) {
    // Column and row infinity norms in a single column-major sweep.
    VectorXd d(n);
    VectorXd e = VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = s.P.col(j).cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = std::abs(s.A(i, j));
        norm = std::max(norm, a);
        e[i] = std::max(e[i], a);
      }
      d[j] = safe_scale(norm);
    }
    for (Eigen::Index i = 0; i < m; ++i) e[i] = safe_scale(e[i]);
    s.P.array().colwise() *= d.array();
    s.P.array().rowwise() *= d.transpose().array();
    if (m > 0) {
      s.A.array().colwise() *= e.array();
      s.A.array().rowwise() *= d.transpose().array();
    }
    s.q = d.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(d);
    s.E = s.E.cwiseProduct(e);

    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += s.P.col(j).cwiseAbs().maxCoeff();
    mean_col /= static_cast<double>(std::max<Eigen::Index>(n, 1));
    double cost_norm = std::max(mean_col, inf_norm(s.q));
    if (cost_norm < kMinScaling) cost_norm = 1.0;
    const double c_step = 1.0 / std::min(cost_norm, kMaxScaling);
    s.P *= c_step;
    s.q *= c_step;
    s.c *= c_step;
  }
  s.l = prob.lower.cwiseMax(-kInfinity);
  s.u = prob.upper.cwiseMin(kInfinity);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s.l[i] > -kInfinity) s.l[i] *= s.E[i];
    if (s.u[i] < kInfinity) s.u[i] *= s.E[i];
  }
  return s;
}

VectorXd rho_vector(const Scaled& s, double rho) {
  VectorXd r(s.l.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (s.l[i] <= -kInfinity && s.u[i] >= kInfinity)
      r[i] = kRhoMin;
    else if (s.u[i] - s.l[i] < kEqualityTol)
      r[i] = kRhoEqualityFactor * rho;
    else
      r[i] = rho;
  }
  return r;
}

struct Residuals {
  double prim, dual, eps_prim, eps_dual;
  // scaled, normalized quantities for the rho update
  double prim_rel, dual_rel;
};

Residuals residuals(const Scaled& s, const VectorXd& x, const VectorXd& z, const VectorXd& y, const Settings& st) {
  const VectorXd Ax = s.A * x;
  const VectorXd Px = s.P * x;
  const VectorXd Aty = s.A.transpose() * y;
  const VectorXd Einv = s.E.cwiseInverse();
  const VectorXd Dinv = s.D.cwiseInverse();
  Residuals r{};
  r.prim = inf_norm(Einv.cwiseProduct(Ax - z));
  r.dual = inf_norm(Dinv.cwiseProduct(Px + s.q + Aty)) / s.c;
  const double ax_n = inf_norm(Einv.cwiseProduct(Ax));
  const double z_n = inf_norm(Einv.cwiseProduct(z));
  const double px_n = inf_norm(Dinv.cwiseProduct(Px)) / s.c;
  const double aty_n = inf_norm(Dinv.cwiseProduct(Aty)) / s.c;
  const double q_n = inf_norm(Dinv.cwiseProduct(s.q)) / s.c;
  r.eps_prim = st.eps_abs + st.eps_rel * std::max(ax_n, z_n);
  r.eps_dual = st.eps_abs + st.eps_rel * std::max({px_n, aty_n, q_n});
  r.prim_rel = inf_norm(Ax - z) / std::max({inf_norm(Ax), inf_norm(z), 1e-12});
  r.dual_rel = inf_norm(Px + s.q + Aty) / std::max({inf_norm(Px), inf_norm(Aty), inf_norm(s.q), 1e-12});
  return r;
}

bool primal_infeasible(const QuadProgram& prob, const Scaled& s, const VectorXd& dy_scaled, double eps) {
  if (dy_scaled.size() == 0) return false;
  VectorXd dy = s.E.cwiseProduct(dy_scaled);
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (prob.upper[i] >= kInfinity) dy[i] = std::min(dy[i], 0.0);
    if (prob.lower[i] <= -kInfinity) dy[i] = std::max(dy[i], 0.0);
  }
  const double norm = inf_norm(dy);
  if (norm < kDivisionTol) return false;
  dy /= norm;
  double support = 0.0;
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (dy[i] > 0.0) support += prob.upper[i] * dy[i];
    if (dy[i] < 0.0) support += prob.lower[i] * dy[i];
  }
  return inf_norm(prob.A.transpose() * dy) < eps && support < -eps;
}

bool dual_infeasible(const QuadProgram& prob, const Scaled& s, const VectorXd& dx_scaled, double eps) {
  VectorXd dx = s.D.cwiseProduct(dx_scaled);
  const double norm = inf_norm(dx);
  if (norm < kDivisionTol) return false;
  dx /= norm;
  if (inf_norm(prob.P * dx) >= eps) return false;
  if (prob.q.dot(dx) >= -eps) return false;
  const VectorXd adx = prob.A * dx;
  for (Eigen::Index i = 0; i < adx.size(); ++i) {
    const bool up_inf = prob.upper[i] >= kInfinity;
    const bool lo_inf = prob.lower[i] <= -kInfinity;
    if (!up_inf && adx[i] > eps) return false;
    if (!lo_inf && adx[i] < -eps) return false;
  }
  return true;
}

struct Polished {
  VectorXd x, y;
  double prim, dual;
  bool ok = false;
};

Polished polish(const QuadProgram& prob, const Scaled& s, const VectorXd& z_s, const VectorXd& y_s, int refine) {
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_constraints();
  std::vector<Eigen::Index> rows;
  std::vector<double> rhs_b;
  std::vector<int> side;  // -1 lower, +1 upper
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s.u[i] - z_s[i] < y_s[i]) {
      rows.push_back(i);
      rhs_b.push_back(prob.upper[i]);
      side.push_back(1);
    } else if (z_s[i] - s.l[i] < -y_s[i]) {
      rows.push_back(i);
      rhs_b.push_back(prob.lower[i]);
      side.push_back(-1);
    }
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  MatrixXd Aact(k, n);
  VectorXd b(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    Aact.row(r) = prob.A.row(rows[r]);
    b[r] = rhs_b[r];
  }
  MatrixXd K = MatrixXd::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = prob.P;
  K.topRightCorner(n, k) = Aact.transpose();
  K.bottomLeftCorner(k, n) = Aact;
  MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += kPolishDelta;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= kPolishDelta;
  VectorXd rhs(n + k);
  rhs.head(n) = -prob.q;
  rhs.tail(k) = b;

  const Eigen::PartialPivLU<MatrixXd> lu(Kreg);
  VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < refine; ++it) sol += lu.solve(rhs - K * sol);

  Polished p;
  if (!sol.allFinite()) return p;
  p.x = sol.head(n);
  p.y = VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) {
    double yr = sol[n + r];
    // a multiplier with the wrong sign means the guessed active set is wrong
    if (side[r] > 0 && yr < -1e-9 * std::max(1.0, inf_norm(prob.q))) return p;
    if (side[r] < 0 && yr > 1e-9 * std::max(1.0, inf_norm(prob.q))) return p;
    p.y[rows[r]] = yr;
  }
  const VectorXd Ax = prob.A * p.x;
  double prim = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    prim = std::max(prim, std::max(prob.lower[i] - Ax[i], Ax[i] - prob.upper[i]));
  }
  p.prim = std::max(prim, 0.0);
  p.dual = inf_norm(prob.P * p.x + prob.q + prob.A.transpose() * p.y);
  p.ok = true;
  return p;
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::MaxIter: return "max_iter";
    case Status::Infeasible: return "infeasible";
  }
  return "unknown";
}

void validate(const QuadProgram& prob) {
  const Eigen::Index n = prob.q.size();
  const Eigen::Index m = prob.A.rows();
  if (prob.P.rows() != n || prob.P.cols() != n) throw std::invalid_argument("P must be n x n");
  if (prob.A.cols() != n && m > 0) throw std::invalid_argument("A must have n columns");
  if (prob.lower.size() != m || prob.upper.size() != m) throw std::invalid_argument("bounds must have m entries");
  if (prob.P.hasNaN() || prob.q.hasNaN() || prob.A.hasNaN() || prob.lower.hasNaN() || prob.upper.hasNaN())
    throw std::invalid_argument("QP data contains NaN");
  if (!prob.P.allFinite() || !prob.q.allFinite() || !prob.A.allFinite())
    throw std::invalid_argument("QP cost and constraint matrices must be finite");
  const double scale = std::max(1.0, prob.P.cwiseAbs().maxCoeff());
  if ((prob.P - prob.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("P must be symmetric");
  for (Eigen::Index i = 0; i < m; ++i)
    if (prob.lower[i] > prob.upper[i]) throw std::invalid_argument("lower bound exceeds upper bound");
}

Result solve(const QuadProgram& prob, const std::optional<WarmStart>& warm, const Settings& st) {
  validate(prob);
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_constraints();
  QuadProgram work = prob;
  if (m == 0) work.A.resize(0, n);
  const Scaled s = scale_problem(work, st.scaling_iters);

  double rho = st.rho;
  VectorXd rho_vec = rho_vector(s, rho);
  auto factor = [&](const VectorXd& rv) {
    MatrixXd K = s.P;
    K.diagonal().array() += st.sigma;
    if (m > 0) {
      const MatrixXd W = rv.cwiseSqrt().asDiagonal() * s.A;
      K.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
    }
    return Eigen::LLT<MatrixXd>(K);
  };
  Eigen::LLT<MatrixXd> llt = factor(rho_vec);

  VectorXd x = VectorXd::Zero(n);
  VectorXd y = VectorXd::Zero(m);
  if (warm) {
    if (warm->x.size() == n) x = s.D.cwiseInverse().cwiseProduct(warm->x);
    if (warm->y.size() == m) y = s.c * s.E.cwiseInverse().cwiseProduct(warm->y);
  }
  VectorXd z = (s.A * x).cwiseMax(s.l).cwiseMin(s.u);

  Result res;
  res.status = Status::MaxIter;
  VectorXd x_prev = x, y_prev = y;
  Residuals r{};
  int iter = 0;
  for (iter = 1; iter <= st.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    const VectorXd rhs = st.sigma * x - s.q + s.A.transpose() * (rho_vec.cwiseProduct(z) - y);
    const VectorXd x_tilde = llt.solve(rhs);
    const VectorXd z_tilde = s.A * x_tilde;
    x = st.alpha * x_tilde + (1.0 - st.alpha) * x_prev;
    const VectorXd z_relaxed = st.alpha * z_tilde + (1.0 - st.alpha) * z;
    const VectorXd z_new = (z_relaxed + rho_vec.cwiseInverse().cwiseProduct(y)).cwiseMax(s.l).cwiseMin(s.u);
    y = y + rho_vec.cwiseProduct(z_relaxed - z_new);
    z = z_new;

    const bool check = (iter % st.check_interval == 0) || iter == st.max_iter;
    if (!check) continue;
    r = residuals(s, x, z, y, st);
    if (st.record_history)
      res.merit_history.push_back(std::max(r.prim / r.eps_prim, r.dual / r.eps_dual));
    if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
      res.status = Status::Solved;
      break;
    }
    if (primal_infeasible(prob, s, y - y_prev, st.eps_prim_inf) ||
        dual_infeasible(prob, s, x - x_prev, st.eps_dual_inf)) {
      res.status = Status::Infeasible;
      break;
    }
    if (st.adaptive_rho && m > 0 && iter % kAdaptiveRhoInterval == 0) {
      const double ratio = std::sqrt(r.prim_rel / std::max(r.dual_rel, 1e-30));
      const double rho_new = std::clamp(rho * ratio, kRhoMin, kRhoMax);
      if (rho_new > st.adaptive_rho_tolerance * rho || rho_new < rho / st.adaptive_rho_tolerance) {
        rho = rho_new;
        rho_vec = rho_vector(s, rho);
        llt = factor(rho_vec);
      }
    }
  }
  res.iterations = std::min(iter, st.max_iter);

  res.x = s.D.cwiseProduct(x);
  res.y = s.E.cwiseProduct(y) / s.c;
  res.primal_residual = r.prim;
  res.dual_residual = r.dual;

  if (res.status == Status::Solved && st.polish) {
    const Polished p = polish(prob, s, z, y, st.polish_refine_iter);
    if (p.ok && p.prim <= std::max(r.prim, 1e-9) && p.dual <= std::max(r.dual, 1e-9)) {
      res.x = p.x;
      res.y = p.y;
      res.primal_residual = p.prim;
      res.dual_residual = p.dual;
      res.polished = true;
    }
  }
  res.objective = prob.objective(res.x);
  return res;
}

}  // namespace forestnav::qp
