#pragma once

#include <Eigen/Dense>
#include <functional>

#include "tdelay/kernels.hpp"
#include "tdelay/penalty.hpp"

// Reference solutions that share no code with the descent and penalty paths
// beyond the grid and history sampling.
namespace tdelay::oracle {

/// Method of steps for x' = A x(t - tau1) + B u(t): the delayed term over each
/// step is already known, and the step is integrated by the trapezoid rule.
/// Returns N x n_nodes (history sampled, no terminal pin).
Eigen::MatrixXd integrate_mos(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const ControlPath& u,
                              const HistorySpec& hist, const DelayGrid& grid);

struct KKTSolution {
  Eigen::MatrixXd x;            // N x n_nodes
  Eigen::MatrixXd u;            // m x n_main, u(T) mirrors u(t_{M-1})
  Eigen::MatrixXd multipliers;  // N x M, one column per dynamics row
  double objective = 0.0;
  double residual = 0.0;  // max |KKT row violation|
};

/// Dense KKT solve of the discrete LQ problem on the same grid, quadrature and
/// forward-difference dynamics as the penalty path. Throws SingularKKT when
/// the system is rank deficient and ProblemTooLarge beyond ~4000 unknowns.
KKTSolution lq_direct_solve(const ControlProblem& prob);

/// Discrete cost int l of a pair, used to spot-check optimality.
double lq_cost(const ControlProblem& prob, const Eigen::MatrixXd& x, const Eigen::MatrixXd& u);

struct QuadraticVariationalSolution {
  Eigen::MatrixXd x;  // N x n_nodes
  double objective = 0.0;
};

/// Minimizer of the discrete functional for L = 1/2 z^T W z + w^T z,
/// z = (a, a_delay, b, b_delay), by a direct linear solve.
QuadraticVariationalSolution quadratic_variational_solve(const DelayGrid& grid, const Eigen::MatrixXd& W,
                                                         const Eigen::VectorXd& w, const HistorySpec& hist,
                                                         const Eigen::VectorXd& alpha);

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double epsilon = 1e-6, kernels::Exec exec = kernels::Exec::parallel);

/// max_k |a_k - ref_k| / max(|ref_k|, 1e-3 |ref|_inf, 1e-300): relative error
/// per coordinate, with a floor so coordinates that are nearly zero compared
/// to the rest do not turn roundoff into a large ratio.
double relative_gradient_error(const Eigen::VectorXd& a, const Eigen::VectorXd& ref);

}  // namespace tdelay::oracle
