#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "tdelay/trajectory.hpp"

namespace tdelay {

/// Gradients of L with respect to a, a_delay, b, b_delay and (for penalized
/// Lagrangians) the control argument c.
struct Partials {
  Eigen::VectorXd d_a;
  Eigen::VectorXd d_a_delay;
  Eigen::VectorXd d_b;
  Eigen::VectorXd d_b_delay;
  Eigen::VectorXd d_c;  // empty when control_dim == 0
};

/// Callable L(t, a, a_delay, b, b_delay[, c]) with its partial derivatives.
/// control_dim is 0 for plain variational problems. Both callables must be
/// reentrant: kernels evaluate nodes concurrently.
class DelayedLagrangian {
 public:
  using ValueFn = std::function<double(const DelayedTuple&, const Eigen::VectorXd& control)>;
  using PartialsFn = std::function<Partials(const DelayedTuple&, const Eigen::VectorXd& control)>;

  DelayedLagrangian(std::string name, int state_dim, int control_dim, ValueFn value, PartialsFn partials);

  /// Partials by central differences. Flagged through uses_fd_partials().
  static DelayedLagrangian with_fd_partials(std::string name, int state_dim, int control_dim, ValueFn value,
                                            double epsilon = 1e-6);

  /// Throws DimensionMismatch or NonFiniteValue.
  double eval(const DelayedTuple& tuple, const Eigen::VectorXd& control = {}) const;
  Partials partials(const DelayedTuple& tuple, const Eigen::VectorXd& control = {}) const;

  const std::string& name() const noexcept { return name_; }
  int state_dim() const noexcept { return state_dim_; }
  int control_dim() const noexcept { return control_dim_; }
  bool uses_fd_partials() const noexcept { return fd_partials_; }

 private:
  void check_args(const DelayedTuple& tuple, const Eigen::VectorXd& control) const;

  std::string name_;
  int state_dim_;
  int control_dim_;
  bool fd_partials_ = false;
  ValueFn value_;
  PartialsFn partials_;
};

DelayedLagrangian zero_lagrangian(int state_dim);
DelayedLagrangian constant_lagrangian(int state_dim, double value);

/// L = 1/2 z^T W z + w^T z with z = (a, a_delay, b, b_delay) in R^{4N}.
/// W must be symmetric.
DelayedLagrangian quadratic_lagrangian(const Eigen::MatrixXd& weight, const Eigen::VectorXd& linear);

/// Block-diagonal quadratic: L = a^T Wa a + ad^T Wad ad + b^T Wb b + bd^T Wbd bd
/// plus optional linear terms.
struct QuadraticLagrangianWeights {
  Eigen::MatrixXd a, a_delay, b, b_delay;
  Eigen::VectorXd lin_a, lin_a_delay, lin_b, lin_b_delay;

  int state_dim() const { return static_cast<int>(a.rows()); }
  /// Symmetry to 1e-12; fills empty linear terms with zeros.
  QuadraticLagrangianWeights normalized() const;
  bool operator==(const QuadraticLagrangianWeights& other) const;
};
DelayedLagrangian quadratic_lagrangian(const QuadraticLagrangianWeights& weights);

/// Non-polynomial test family:
/// L = |b|^2/2 + kd |b_delay|^2/2 + w2 |a|^2/2 + beta |a|^4/4 + gamma <a, a_delay>
///     + forcing sin(t) sum(a).
struct AnharmonicParams {
  double delay_kinetic = 0.5;
  double stiffness = 1.0;
  double quartic = 0.25;
  double coupling = 0.1;
  double forcing = 0.0;
  bool operator==(const AnharmonicParams&) const = default;
};
DelayedLagrangian anharmonic_lagrangian(int state_dim, const AnharmonicParams& params);

struct RunningCostPartials {
  Eigen::VectorXd d_a;
  Eigen::VectorXd d_b_delay;
  Eigen::VectorXd d_c;
};

/// Running cost l(t, a, b_delay, c) of the control problem.
class RunningCost {
 public:
  using ValueFn = std::function<double(double, const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using PartialsFn =
      std::function<RunningCostPartials(double, const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  RunningCost(int state_dim, int control_dim, ValueFn value, PartialsFn partials, double coercivity_rho = 0.0);

  double eval(double t, const Eigen::VectorXd& a, const Eigen::VectorXd& b_delay, const Eigen::VectorXd& c) const;
  RunningCostPartials partials(double t, const Eigen::VectorXd& a, const Eigen::VectorXd& b_delay,
                               const Eigen::VectorXd& c) const;

  int state_dim() const noexcept { return state_dim_; }
  int control_dim() const noexcept { return control_dim_; }
  /// Declared rho of l >= rho |c|; 0 when unknown.
  double coercivity_rho() const noexcept { return rho_; }

 private:
  int state_dim_;
  int control_dim_;
  double rho_;
  ValueFn value_;
  PartialsFn partials_;
};

/// l = a^T Q a + bd^T S bd + c^T R c + q.a + s.bd + r.c
struct QuadraticCostSpec {
  Eigen::MatrixXd Q, S, R;
  Eigen::VectorXd q, s, r;
  double rho = 0.0;

  int state_dim() const { return static_cast<int>(Q.rows()); }
  int control_dim() const { return static_cast<int>(R.rows()); }
  /// Shapes, symmetry (1e-12), Q and S PSD, R PD. Empty linear terms become zeros.
  QuadraticCostSpec normalized() const;
  RunningCost to_running_cost() const;
  bool operator==(const QuadraticCostSpec& other) const;
};

/// L_n(t,a,ad,b,bd,c) = l(t,a,bd,c) + (c_n/2) |b - A ad - B c|^2.
/// c_n = 0 reproduces l; negative or non-finite c_n is rejected.
DelayedLagrangian make_penalized(const RunningCost& cost, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 double c_n);

/// Residual b - A ad - B c used by the penalty and by phi_n.
Eigen::VectorXd dynamics_residual(const DelayedTuple& tuple, const Eigen::VectorXd& control,
                                  const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Symmetric to 1e-12 (relative to the largest entry).
bool is_symmetric(const Eigen::MatrixXd& m);

}  // namespace tdelay
