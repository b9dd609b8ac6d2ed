#include "tdelay/penalty.hpp"

#include <cmath>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

int free_first(const DelayGrid& grid) { return grid.n_history() + 1; }
int free_count(const DelayGrid& grid) { return grid.n_main() - 2; }

Eigen::MatrixXd controls_with_mirror(const DelayGrid& grid, const Eigen::VectorXd& z, int offset, int m) {
  const int count = free_count(grid);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, grid.n_main());
  u.middleCols(1, count) = z.segment(offset, m * count).reshaped(m, count);
  u.col(grid.last_main()) = u.col(grid.last_main() - 1);
  return u;
}

// Residual of d/dt phi = [A^T phi(t + tau1)] + (a -/+ e)/c (regimes 1, 2) and
// d/dt phi = a/c (regime 3), sup over regime-interior nodes t_1..t_{M-2}.
double phi_ode_residual(const DelayGrid& grid, const Eigen::MatrixXd& A, const Eigen::MatrixXd& phi,
                        const Eigen::MatrixXd& a, const Eigen::MatrixXd& e, double c_n, double sign) {
  const int last = grid.last_main();
  const int r1_end = last - grid.k1();
  const int r2_end = last - grid.k2();
  double worst = 0.0;
  for (int i = 1; i + 1 <= last - 1; ++i) {
    if (i == r1_end || i == r1_end + 1 || i == r2_end || i == r2_end + 1) continue;
    const Eigen::VectorXd dphi = (phi.col(i + 1) - phi.col(i - 1)) / (2.0 * grid.h());
    Eigen::VectorXd rhs = a.col(i) / c_n;
    if (i <= r2_end) rhs += sign * e.col(i) / c_n;
    if (i <= r1_end && i + grid.k1() <= last - 1) rhs += A.transpose() * phi.col(i + grid.k1());
    worst = std::max(worst, (dphi - rhs).norm());
  }
  return worst;
}

}  // namespace

void ControlProblem::validate() const {
  const int n = state_dim();
  const int m = control_dim();
  if (n < 1 || A.cols() != n) throw validation_error("dynamics.A", "must be state_dim x state_dim");
  if (m < 1 || B.rows() != n) throw validation_error("dynamics.B", "must be state_dim x control_dim");
  if (!A.allFinite()) throw validation_error("dynamics.A", "must be finite");
  if (!B.allFinite()) throw validation_error("dynamics.B", "must be finite");
  if (cost.state_dim() != n || cost.control_dim() != m) {
    throw Error(ErrorCode::DimensionMismatch, "running cost dimensions differ from the dynamics");
  }
  if (history.state_dim != n) throw validation_error("history", "must have state_dim components");
  if (alpha.size() != n) throw validation_error("alpha", "must have state_dim entries");
  history.validate(grid.tau1().to_double(), grid.tau2().to_double());
  if (quadratic && (quadratic->state_dim() != n || quadratic->control_dim() != m)) {
    throw Error(ErrorCode::DimensionMismatch, "quadratic cost dimensions differ from the dynamics");
  }
}

double PenaltyConfig::c_at(int stage) const { return c_start * std::pow(growth, stage); }

void PenaltyConfig::validate() const {
  if (!(c_start > 0.0) || !std::isfinite(c_start)) throw validation_error("penalty.c_start", "must be > 0");
  if (!(growth > 1.0) || !std::isfinite(growth)) throw validation_error("penalty.growth", "must be > 1");
  if (stages < 1) throw validation_error("penalty.stages", "must be >= 1");
  if (!(dyn_residual_tol > 0.0)) throw validation_error("penalty.dyn_residual_tol", "must be > 0");
  inner.validate();
}

Eigen::MatrixXd compute_phi(const ControlProblem& prob, const Eigen::MatrixXd& x, const Eigen::MatrixXd& u) {
  const DelayGrid& grid = prob.grid;
  const int n = prob.state_dim();
  if (x.rows() != n || x.cols() != grid.n_nodes()) throw Error(ErrorCode::DimensionMismatch, "x must be N x n_nodes");
  if (u.rows() != prob.control_dim() || u.cols() != grid.n_main()) {
    throw Error(ErrorCode::DimensionMismatch, "u must be m x n_main");
  }
  Eigen::MatrixXd phi(n, grid.n_main());
  for (int i = 0; i < grid.n_main(); ++i) {
    const int g = grid.global_index(i);
    const auto [lo, hi] = derivative_stencil(grid, g);
    phi.col(i) = (x.col(hi) - x.col(lo)) / grid.h() - prob.A * x.col(grid.shifted_index(i, Delay::state)) -
                 prob.B * u.col(i);
  }
  return phi;
}

Eigen::MatrixXd compute_phi(const ControlProblem& prob, const Trajectory& traj, const ControlPath& u) {
  if (!(traj.grid() == prob.grid) || !(u.grid() == prob.grid)) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory and control must live on the problem grid");
  }
  return compute_phi(prob, traj.values(), u.values());
}

Stationarity stationarity_diagnostics(const ControlProblem& prob, const Trajectory& traj, const ControlPath& u,
                                      double c_n, std::optional<double> stage0_sup) {
  if (!(c_n > 0.0)) throw Error(ErrorCode::NonPositivePenalty, "stationarity needs c_n > 0");
  const Eigen::MatrixXd phi = compute_phi(prob, traj, u);
  const int last = prob.grid.last_main();
  Stationarity out;
  for (int i = 0; i < last; ++i) out.phi_sup_norm = std::max(out.phi_sup_norm, phi.col(i).norm());
  for (int i = 1; i < last; ++i) {
    const DelayedTuple tuple = traj.delayed_tuple(i);
    const RunningCostPartials lp = prob.cost.partials(tuple.t, tuple.a, tuple.b_delay, u.value(i));
    out.stationarity_gap = std::max(out.stationarity_gap, (prob.B.transpose() * phi.col(i) - lp.d_c / c_n).norm());
  }
  if (stage0_sup) out.bound_flag = out.phi_sup_norm > 10.0 * *stage0_sup;
  return out;
}

Eigen::VectorXd pack_decision(const Trajectory& traj, const ControlPath& u) {
  const DelayGrid& grid = traj.grid();
  const int m = u.control_dim();
  const int count = free_count(grid);
  Eigen::VectorXd z(traj.n_free() + m * count);
  z << traj.free_values(), u.values().middleCols(1, count).reshaped();
  return z;
}

void unpack_decision(const Eigen::VectorXd& z, Trajectory& traj, ControlPath& u) {
  const DelayGrid& grid = traj.grid();
  const int m = u.control_dim();
  const int nx = traj.n_free();
  if (z.size() != nx + m * free_count(grid)) throw Error(ErrorCode::DimensionMismatch, "decision vector size");
  traj.set_free_values(z.head(nx));
  const Eigen::MatrixXd values = controls_with_mirror(grid, z, nx, m);
  for (int i = 1; i < grid.n_main(); ++i) u.set_value(i, values.col(i));
}

Objective penalized_objective(const ControlProblem& prob, double c_n, const Trajectory& shape, kernels::Exec exec) {
  const DelayedLagrangian lag = make_penalized(prob.cost, prob.A, prob.B, c_n);
  const DelayGrid grid = prob.grid;
  const std::vector<double> weights = kernels::quadrature_weights(grid);
  const int n = prob.state_dim();
  const int m = prob.control_dim();
  const int nx = shape.n_free();

  Objective obj;
  obj.value = [=](const Eigen::VectorXd& z) {
    Trajectory traj = shape;
    traj.set_free_values(z.head(nx));
    const Eigen::MatrixXd u = controls_with_mirror(grid, z, nx, m);
    return kernels::weighted_sum(kernels::node_values(lag, traj, &u, exec), weights);
  };
  obj.value_and_gradient = [=](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    Trajectory traj = shape;
    traj.set_free_values(z.head(nx));
    const Eigen::MatrixXd u = controls_with_mirror(grid, z, nx, m);
    const double f = kernels::weighted_sum(kernels::node_values(lag, traj, &u, exec), weights);
    const auto raw = kernels::scatter_gradient(grid, kernels::node_partials(lag, traj, &u, exec), weights, n, m);
    const int count = free_count(grid);
    grad.resize(z.size());
    grad << raw.state.middleCols(free_first(grid), count).reshaped(), raw.control.middleCols(1, count).reshaped();
    return f;
  };
  return obj;
}

PenaltyReport solve_control_problem(const ControlProblem& prob, const PenaltyConfig& cfg, kernels::Exec exec) {
  prob.validate();
  cfg.validate();
  const DelayGrid& grid = prob.grid;
  const int last = grid.last_main();
  const std::vector<double> weights = kernels::quadrature_weights(grid);

  PenaltyReport report{{},
                       Trajectory::init(grid, prob.history, prob.alpha, InitMode::linear),
                       ControlPath::zero(grid, prob.control_dim())};
  Eigen::VectorXd z = pack_decision(report.final_trajectory, report.final_control);
  for (int n = 0; n < cfg.stages; ++n) {
    const double c_n = cfg.c_at(n);
    const Objective obj = penalized_objective(prob, c_n, report.final_trajectory, exec);
    MinimizeResult res;
    try {
      res = minimize(obj, z, cfg.inner);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LineSearchFailure && e.code() != ErrorCode::NonFiniteValue) throw;
      throw InnerSolveFailure("stage " + std::to_string(n) + " (c_n=" + std::to_string(c_n) + "): " + e.what(),
                              report);
    }
    z = res.x;
    unpack_decision(z, report.final_trajectory, report.final_control);
    const Trajectory& traj = report.final_trajectory;
    const ControlPath& u = report.final_control;

    StageDiagnostics st;
    st.c_n = c_n;
    st.inner = std::move(res.report);
    st.objective = st.inner.final_value;
    const Eigen::MatrixXd phi = compute_phi(prob, traj, u);
    std::vector<double> cost(static_cast<std::size_t>(grid.n_main()));
    std::vector<double> phi_sq(cost.size());
    st.a_n.resize(prob.state_dim(), grid.n_main());
    st.e_n.resize(prob.state_dim(), grid.n_main());
    st.b_n.resize(prob.control_dim(), grid.n_main());
    for (int i = 0; i <= last; ++i) {
      const DelayedTuple tuple = traj.delayed_tuple(i);
      const Eigen::VectorXd ui = u.value(i);
      cost[static_cast<std::size_t>(i)] = prob.cost.eval(tuple.t, tuple.a, tuple.b_delay, ui);
      const RunningCostPartials lp = prob.cost.partials(tuple.t, tuple.a, tuple.b_delay, ui);
      st.a_n.col(i) = lp.d_a;
      st.e_n.col(i) = lp.d_b_delay;
      st.b_n.col(i) = lp.d_c;
      phi_sq[static_cast<std::size_t>(i)] = phi.col(i).squaredNorm();
    }
    st.cost_value = kernels::weighted_sum(cost, weights);
    const double phi_l2_sq = kernels::weighted_sum(phi_sq, weights);
    st.penalty_value = 0.5 * c_n * phi_l2_sq;
    st.dyn_residual_norm = std::sqrt(phi_l2_sq);
    const Stationarity s = stationarity_diagnostics(
        prob, traj, u, c_n,
        report.stages.empty() ? std::nullopt : std::optional<double>(report.stages.front().phi_sup_norm));
    st.phi_sup_norm = s.phi_sup_norm;
    st.stationarity_gap = s.stationarity_gap;
    st.bound_flag = s.bound_flag;
    st.phi_ode_residual_minus = phi_ode_residual(grid, prob.A, phi, st.a_n, st.e_n, c_n, -1.0);
    st.phi_ode_residual_plus = phi_ode_residual(grid, prob.A, phi, st.a_n, st.e_n, c_n, +1.0);
    report.bound_flag = report.bound_flag || st.bound_flag;
    report.stages.push_back(std::move(st));
    if (cfg.early_stop && report.stages.back().dyn_residual_norm <= cfg.dyn_residual_tol) break;
  }
  const StageDiagnostics& final_stage = report.stages.back();
  report.converged = final_stage.dyn_residual_norm <= cfg.dyn_residual_tol && final_stage.inner.converged;
  report.objective_estimate = final_stage.cost_value;
  return report;
}

}  // namespace tdelay
