#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace tdelay {

enum class Direction { steepest, lbfgs };

struct InnerOptions {
  double grad_tol = 1e-8;
  int max_iters = 50000;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  Direction direction = Direction::steepest;
  /// Steepest descent only: start each line search at the Barzilai-Borwein step.
  bool bb_warm_start = false;
  int lbfgs_memory = 10;

  /// Throws ValidationError naming the offending option.
  void validate() const;
  bool operator==(const InnerOptions&) const = default;
};

struct InnerReport {
  int iterations = 0;
  double final_value = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::string stop_reason;
  // f at the start and after every step; nonincreasing up to 64 eps |f|.
  std::vector<double> value_history;
};

/// f(x) and its gradient over an unconstrained decision vector (the free
/// nodes), so every iterate keeps the pinned nodes exactly.
struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd& grad)> value_and_gradient;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  InnerReport report;
};

/// Descent with Armijo backtracking. Stops when |grad| <= grad_tol (converged),
/// at max_iters, or when a step no longer moves x (not converged).
/// Throws LineSearchFailure or NonFiniteValue.
MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& init, const InnerOptions& opts);

/// Largest s = step0 * factor^k with f(x + s d) <= f(x) + c s <g, d>. When the
/// predicted decrease s <g, d> is below the resolution of f (64 eps |f|), the
/// value test is skipped: the step is accepted if <g(x + s d), d> <=
/// (2 delta - 1) <g, d> with delta = max(c, 0.1) and f rose by no more than
/// that resolution. Throws LineSearchFailure if <g, d> >= 0 or no step above
/// 1e-16 works.
double line_search(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& grad,
                   const Eigen::VectorXd& direction, const InnerOptions& opts, double step0);

}  // namespace tdelay
