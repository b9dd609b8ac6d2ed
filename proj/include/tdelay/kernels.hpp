#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "tdelay/lagrangian.hpp"
#include "tdelay/trajectory.hpp"

// Per-node work shared by the variational and penalty paths. Every kernel has
// a serial reference and an OpenMP version; the OpenMP version only fills
// per-node slots, and all reductions run serially afterwards so results do
// not depend on the thread count.
namespace tdelay::kernels {

enum class Exec { serial, parallel };

/// Left-endpoint weights on main nodes: h on t_0..t_{M-1}, 0 on t_M = T.
/// Each forward-difference slope then carries exactly one weight h.
std::vector<double> quadrature_weights(const DelayGrid& grid);

/// L at every main node. `control` is control_dim x n_main, or null for a
/// Lagrangian without control argument.
std::vector<double> node_values(const DelayedLagrangian& lag, const Trajectory& traj,
                                const Eigen::MatrixXd* control, Exec exec);
std::vector<Partials> node_partials(const DelayedLagrangian& lag, const Trajectory& traj,
                                    const Eigen::MatrixXd* control, Exec exec);

/// Compensated (Neumaier) sum of w_i * v_i.
double weighted_sum(const std::vector<double>& values, const std::vector<double>& weights);

struct RawGradient {
  Eigen::MatrixXd state;    // N x n_nodes, before projection
  Eigen::MatrixXd control;  // m x n_main (empty when m = 0)
};

/// Transpose of the discrete functional: d_a lands on node i, d_a_delay on
/// i - k1, d_b on the derivative stencil of i, d_b_delay on the stencil of
/// i - k2, d_c on control node i; all scaled by the node weight.
RawGradient scatter_gradient(const DelayGrid& grid, const std::vector<Partials>& partials,
                             const std::vector<double>& weights, int state_dim, int control_dim);

/// Central differences (f(x + e_k eps) - f(x - e_k eps)) / 2 eps per
/// coordinate. The parallel version calls f concurrently; f must be reentrant.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double epsilon, Exec exec);

}  // namespace tdelay::kernels
