#include "tdelay/kernels.hpp"

#include <cmath>
#include <exception>
#include <limits>

#include "tdelay/error.hpp"

namespace tdelay::kernels {
namespace {

// Runs body(i) for i in [0, n). In parallel mode an exception from any node is
// captured and the one with the lowest index is rethrown after the loop.
template <class Body>
void for_each_node(int n, Exec exec, Body&& body) {
  if (exec == Exec::serial) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  int first_index = std::numeric_limits<int>::max();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(tdelay_kernel_error)
      if (i < first_index) {
        first_index = i;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

Eigen::VectorXd control_at(const Eigen::MatrixXd* control, int i) {
  if (control == nullptr) return {};
  return control->col(i);
}

void check_control(const DelayedLagrangian& lag, const Trajectory& traj, const Eigen::MatrixXd* control) {
  const int m = lag.control_dim();
  if (m == 0 && control == nullptr) return;
  if (control == nullptr || control->rows() != m || control->cols() != traj.grid().n_main()) {
    throw Error(ErrorCode::DimensionMismatch, "control must be control_dim x n_main");
  }
}

}  // namespace

std::vector<double> quadrature_weights(const DelayGrid& grid) {
  std::vector<double> w(static_cast<std::size_t>(grid.n_main()), grid.h());
  w.back() = 0.0;
  return w;
}

std::vector<double> node_values(const DelayedLagrangian& lag, const Trajectory& traj,
                                const Eigen::MatrixXd* control, Exec exec) {
  check_control(lag, traj, control);
  const int n = traj.grid().n_main();
  std::vector<double> out(static_cast<std::size_t>(n));
  for_each_node(n, exec, [&](int i) { out[static_cast<std::size_t>(i)] = lag.eval(traj.delayed_tuple(i), control_at(control, i)); });
  return out;
}

std::vector<Partials> node_partials(const DelayedLagrangian& lag, const Trajectory& traj,
                                    const Eigen::MatrixXd* control, Exec exec) {
  check_control(lag, traj, control);
  const int n = traj.grid().n_main();
  std::vector<Partials> out(static_cast<std::size_t>(n));
  for_each_node(n, exec,
                [&](int i) { out[static_cast<std::size_t>(i)] = lag.partials(traj.delayed_tuple(i), control_at(control, i)); });
  return out;
}

double weighted_sum(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.size() != weights.size()) throw Error(ErrorCode::DimensionMismatch, "weights and values differ in length");
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double term = weights[i] * values[i];
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  const double total = sum + comp;
  if (!std::isfinite(total)) throw Error(ErrorCode::NonFiniteValue, "functional is not finite");
  return total;
}

RawGradient scatter_gradient(const DelayGrid& grid, const std::vector<Partials>& partials,
                             const std::vector<double>& weights, int state_dim, int control_dim) {
  const int n_main = grid.n_main();
  if (static_cast<int>(partials.size()) != n_main || static_cast<int>(weights.size()) != n_main) {
    throw Error(ErrorCode::DimensionMismatch, "one partial set and weight per main node expected");
  }
  RawGradient out;
  out.state = Eigen::MatrixXd::Zero(state_dim, grid.n_nodes());
  out.control = Eigen::MatrixXd::Zero(control_dim, n_main);
  const double inv_h = 1.0 / grid.h();
  auto add_slope = [&](int node, const Eigen::VectorXd& p, double w) {
    const auto [lo, hi] = derivative_stencil(grid, node);
    out.state.col(hi) += (w * inv_h) * p;
    out.state.col(lo) -= (w * inv_h) * p;
  };
  for (int i = 0; i < n_main; ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const Partials& p = partials[static_cast<std::size_t>(i)];
    const int g = grid.global_index(i);
    out.state.col(g) += w * p.d_a;
    out.state.col(grid.shifted_index(i, Delay::state)) += w * p.d_a_delay;
    add_slope(g, p.d_b, w);
    add_slope(grid.shifted_index(i, Delay::derivative), p.d_b_delay, w);
    if (control_dim > 0) out.control.col(i) += w * p.d_c;
  }
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double epsilon, Exec exec) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g(n);
  for_each_node(n, exec, [&](int k) {
    Eigen::VectorXd probe = x;
    probe(k) = x(k) + epsilon;
    const double up = f(probe);
    probe(k) = x(k) - epsilon;
    const double down = f(probe);
    const double d = (up - down) / (2.0 * epsilon);
    if (!std::isfinite(d)) throw Error(ErrorCode::NonFiniteValue, "objective not finite near coordinate " + std::to_string(k));
    g(k) = d;
  });
  return g;
}

}  // namespace tdelay::kernels
