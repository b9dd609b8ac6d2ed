#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tdelay/descent.hpp"
#include "tdelay/kernels.hpp"
#include "tdelay/lagrangian.hpp"
#include "tdelay/trajectory.hpp"

namespace tdelay {

/// min int_0^T l(t, x, x'(t - tau2), u) dt subject to
/// x'(t) = A x(t - tau1) + B u(t), x = theta on [-tau1, 0], x(T) = alpha,
/// u(0) = 0.
struct ControlProblem {
  DelayGrid grid;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  RunningCost cost;
  HistorySpec history;
  Eigen::VectorXd alpha;
  /// Set when the cost came from a quadratic spec; the KKT oracle needs it.
  std::optional<QuadraticCostSpec> quadratic;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

struct PenaltyConfig {
  double c_start = 10.0;
  double growth = 10.0;
  int stages = 5;
  double dyn_residual_tol = 1e-3;
  /// Stop as soon as a stage meets dyn_residual_tol.
  bool early_stop = true;
  InnerOptions inner = lbfgs_defaults();

  static InnerOptions lbfgs_defaults() {
    InnerOptions o;
    o.direction = Direction::lbfgs;
    return o;
  }
  double c_at(int stage) const;
  void validate() const;
  bool operator==(const PenaltyConfig&) const = default;
};

struct StageDiagnostics {
  double c_n = 0.0;
  double objective = 0.0;        // J_n = cost + penalty
  double cost_value = 0.0;       // int l
  double penalty_value = 0.0;    // (c_n / 2) int |phi|^2
  double dyn_residual_norm = 0.0;  // sqrt(int |phi|^2)
  double phi_sup_norm = 0.0;
  double stationarity_gap = 0.0;  // max |B^T phi - l'_c / c_n| over t_1..t_{M-1}
  bool bound_flag = false;        // phi_sup_norm > 10 x stage 0
  // Pointwise residuals of the phi equations with (a - e)/c_n and (a + e)/c_n.
  double phi_ode_residual_minus = 0.0;
  double phi_ode_residual_plus = 0.0;
  Eigen::MatrixXd a_n, e_n, b_n;  // l'_a, l'_bd, l'_c along the iterate (per main node)
  InnerReport inner;
};

struct PenaltyReport {
  std::vector<StageDiagnostics> stages;
  Trajectory final_trajectory;
  ControlPath final_control;
  bool converged = false;
  bool bound_flag = false;
  double objective_estimate = 0.0;
};

/// Thrown when an inner solve fails; carries the stages completed so far.
class InnerSolveFailure : public std::runtime_error {
 public:
  InnerSolveFailure(const std::string& what, PenaltyReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const PenaltyReport& partial() const noexcept { return partial_; }

 private:
  PenaltyReport partial_;
};

PenaltyReport solve_control_problem(const ControlProblem& prob, const PenaltyConfig& cfg,
                                    kernels::Exec exec = kernels::Exec::parallel);

/// phi(t_i) = x'(t_i) - A x(t_i - tau1) - B u(t_i) on every main node.
Eigen::MatrixXd compute_phi(const ControlProblem& prob, const Trajectory& traj, const ControlPath& u);
/// Same on raw arrays: x is N x n_nodes, u is m x n_main.
Eigen::MatrixXd compute_phi(const ControlProblem& prob, const Eigen::MatrixXd& x, const Eigen::MatrixXd& u);

struct Stationarity {
  double phi_sup_norm = 0.0;
  double stationarity_gap = 0.0;
  bool bound_flag = false;
};

/// phi_sup_norm over t_0..t_{M-1}; gap over t_1..t_{M-1} where u is free.
/// bound_flag compares against phi_sup_norm of stage 0 when given.
Stationarity stationarity_diagnostics(const ControlProblem& prob, const Trajectory& traj, const ControlPath& u,
                                      double c_n, std::optional<double> stage0_sup = std::nullopt);

/// Decision vector [free x | u_1..u_{M-1}] and its inverse. u(T) mirrors
/// u(t_{M-1}) since it carries no quadrature weight.
Eigen::VectorXd pack_decision(const Trajectory& traj, const ControlPath& u);
void unpack_decision(const Eigen::VectorXd& z, Trajectory& traj, ControlPath& u);

/// J_n and its gradient over the packed decision vector.
Objective penalized_objective(const ControlProblem& prob, double c_n, const Trajectory& shape,
                              kernels::Exec exec = kernels::Exec::parallel);

}  // namespace tdelay
