#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <utility>

#include "tdelay/grid.hpp"
#include "tdelay/history.hpp"

namespace tdelay {

/// Arguments of the Lagrangian at one main node:
/// (t, x(t), x(t - tau1), x'(t), x'(t - tau2)).
struct DelayedTuple {
  double t = 0.0;
  Eigen::VectorXd a;
  Eigen::VectorXd a_delay;
  Eigen::VectorXd b;
  Eigen::VectorXd b_delay;
};

enum class InitMode { linear, zero, custom };

/// Nodes (lo, hi) such that x'(node) = (x[hi] - x[lo]) / h: forward
/// difference everywhere except a backward difference at the final node.
std::pair<int, int> derivative_stencil(const DelayGrid& grid, int global);

/// State path on every grid node. History nodes, t = 0 (which lies in
/// [-tau2, 0]) and t = T are pinned; only interior main nodes can change.
class Trajectory {
 public:
  static Trajectory init(const DelayGrid& grid, const HistorySpec& hist, const Eigen::VectorXd& alpha,
                         InitMode mode, const Eigen::MatrixXd* custom = nullptr);

  const DelayGrid& grid() const noexcept { return grid_; }
  int state_dim() const noexcept { return static_cast<int>(values_.rows()); }
  /// state_dim x n_nodes, column g is node g.
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::VectorXd value(int global) const;

  bool is_pinned(int global) const noexcept;
  /// Throws PinnedNodeWrite for pinned nodes.
  void set_value(int global, const Eigen::VectorXd& v);

  Eigen::VectorXd derivative_at(int global) const;
  DelayedTuple delayed_tuple(int main_index) const;

  /// Interior main nodes t_1..t_{M-1}, stacked node by node.
  int n_free() const noexcept;
  Eigen::VectorXd free_values() const;
  void set_free_values(const Eigen::VectorXd& z);

 private:
  Trajectory(DelayGrid grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {}

  DelayGrid grid_;
  Eigen::MatrixXd values_;
};

/// Control on main nodes [0, T] with u(0) = 0 pinned.
class ControlPath {
 public:
  static ControlPath zero(const DelayGrid& grid, int control_dim);

  const DelayGrid& grid() const noexcept { return grid_; }
  int control_dim() const noexcept { return static_cast<int>(values_.rows()); }
  /// control_dim x n_main.
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::VectorXd value(int main_index) const;
  /// Throws PinnedNodeWrite for main index 0.
  void set_value(int main_index, const Eigen::VectorXd& v);

 private:
  ControlPath(DelayGrid grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {}

  DelayGrid grid_;
  Eigen::MatrixXd values_;
};

/// Admissible variation: zero on history nodes, t = 0 and t = T.
struct TangentVector {
  DelayGrid grid;
  Eigen::MatrixXd values;  // state_dim x n_nodes
};

TangentVector project_tangent(const DelayGrid& grid, const Eigen::MatrixXd& raw);

/// Bitwise comparison of the pinned entries against freshly sampled values.
struct PinCheck {
  bool history = false;
  bool terminal = false;
  bool control_origin = true;  // u(0) == 0; true when no control is given
  bool all() const { return history && terminal && control_origin; }
};
PinCheck check_pins(const Trajectory& traj, const HistorySpec& hist, const Eigen::VectorXd& alpha,
                    const ControlPath* control = nullptr);

/// CSV rows (t, x_1..x_N, u_1..u_m) for every node; history rows carry
/// negative t and empty control fields. 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ControlPath* control = nullptr);

/// Reads the state columns of a CSV written by write_trajectory_csv. Rows are
/// matched to grid nodes by time; pinned entries must agree with the samples.
Trajectory read_trajectory_csv(std::istream& in, const DelayGrid& grid, const HistorySpec& hist,
                               const Eigen::VectorXd& alpha);

}  // namespace tdelay
