#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdelay/descent.hpp"
#include "tdelay/kernels.hpp"
#include "tdelay/lagrangian.hpp"
#include "tdelay/trajectory.hpp"

namespace tdelay {

/// min J(x) = int_0^T L(t, x(t), x(t - tau1), x'(t), x'(t - tau2)) dt over
/// paths that follow the history and end at alpha. The grid carries the
/// delays; the Lagrangian only sees the tuple.
struct VariationalProblem {
  DelayGrid grid;
  DelayedLagrangian lagrangian;
  HistorySpec history;
  Eigen::VectorXd alpha;

  /// Checks dimensions, history coverage and that L has no control argument.
  void validate() const;
  Trajectory initial(InitMode mode = InitMode::linear) const;
};

/// Discrete J: left-endpoint quadrature of L over the main nodes.
double functional_value(const VariationalProblem& prob, const Trajectory& traj,
                        kernels::Exec exec = kernels::Exec::parallel);

/// Exact gradient of functional_value with respect to node values, projected
/// onto the tangent space (zero on pinned nodes).
TangentVector gradient(const VariationalProblem& prob, const Trajectory& traj,
                       kernels::Exec exec = kernels::Exec::parallel);

/// J and its gradient over the free interior nodes of `shape` (pins taken
/// from `shape`), for descent and finite-difference checks.
Objective variational_objective(const VariationalProblem& prob, const Trajectory& shape,
                                kernels::Exec exec = kernels::Exec::parallel);

/// Residuals of the three-regime Euler-Lagrange system on main nodes.
/// Regime 1 = [0, T - tau1], regime 2 = (T - tau1, T - tau2], regime 3 =
/// (T - tau2, T]. Norms use regime-interior nodes only; residuals at the first
/// and last node of each regime are kept separately for inspection.
struct ELRegime {
  int first = 0;  // main index
  int last = 0;   // main index, inclusive
  Eigen::MatrixXd residual;  // N x (last - first + 1)
  double norm = 0.0;         // sqrt(h * sum over interior nodes of |r|^2)
  double endpoint_max = 0.0;
  int count() const { return last - first + 1; }
};

struct ELResidual {
  std::array<ELRegime, 3> regimes;
  Eigen::MatrixXd p2, p3, p4, p5;  // N x n_main partials along the path
  std::vector<double> times;       // main node times
  std::vector<std::string> warnings;

  /// Regime (1, 2 or 3) of a main index.
  int regime_of(int main_index) const;
};

ELResidual el_residual(const VariationalProblem& prob, const Trajectory& traj,
                       kernels::Exec exec = kernels::Exec::parallel);

/// Rows (t, regime, r_1..r_N, |r|, interior) per main node.
void write_el_residual_csv(std::ostream& out, const ELResidual& res);

}  // namespace tdelay
