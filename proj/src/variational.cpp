#include "tdelay/variational.hpp"

#include <cmath>
#include <ostream>

#include "tdelay/error.hpp"
#include "tdelay/format.hpp"

namespace tdelay {

void VariationalProblem::validate() const {
  if (lagrangian.control_dim() != 0) {
    throw Error(ErrorCode::DimensionMismatch, "variational Lagrangian must not take a control argument");
  }
  if (lagrangian.state_dim() != history.state_dim || alpha.size() != history.state_dim) {
    throw Error(ErrorCode::DimensionMismatch, "Lagrangian, history and alpha dimensions differ");
  }
  history.validate(grid.tau1().to_double(), grid.tau2().to_double());
}

Trajectory VariationalProblem::initial(InitMode mode) const {
  return Trajectory::init(grid, history, alpha, mode);
}

double functional_value(const VariationalProblem& prob, const Trajectory& traj, kernels::Exec exec) {
  if (!(traj.grid() == prob.grid)) throw Error(ErrorCode::DimensionMismatch, "trajectory lives on another grid");
  const auto values = kernels::node_values(prob.lagrangian, traj, nullptr, exec);
  return kernels::weighted_sum(values, kernels::quadrature_weights(prob.grid));
}

TangentVector gradient(const VariationalProblem& prob, const Trajectory& traj, kernels::Exec exec) {
  if (!(traj.grid() == prob.grid)) throw Error(ErrorCode::DimensionMismatch, "trajectory lives on another grid");
  const auto partials = kernels::node_partials(prob.lagrangian, traj, nullptr, exec);
  const auto raw =
      kernels::scatter_gradient(prob.grid, partials, kernels::quadrature_weights(prob.grid), traj.state_dim(), 0);
  return project_tangent(prob.grid, raw.state);
}

Objective variational_objective(const VariationalProblem& prob, const Trajectory& shape, kernels::Exec exec) {
  if (!(shape.grid() == prob.grid)) throw Error(ErrorCode::DimensionMismatch, "trajectory lives on another grid");
  Objective obj;
  obj.value = [prob, shape, exec](const Eigen::VectorXd& z) {
    Trajectory traj = shape;
    traj.set_free_values(z);
    return functional_value(prob, traj, exec);
  };
  obj.value_and_gradient = [prob, shape, exec](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    Trajectory traj = shape;
    traj.set_free_values(z);
    const TangentVector g = gradient(prob, traj, exec);
    grad = g.values.middleCols(prob.grid.n_history() + 1, prob.grid.n_main() - 2).reshaped();
    return functional_value(prob, traj, exec);
  };
  return obj;
}

int ELResidual::regime_of(int main_index) const {
  for (int r = 0; r < 3; ++r) {
    if (main_index >= regimes[r].first && main_index <= regimes[r].last) return r + 1;
  }
  throw Error(ErrorCode::IndexOutOfRange, "main index " + std::to_string(main_index) + " outside all regimes");
}

ELResidual el_residual(const VariationalProblem& prob, const Trajectory& traj, kernels::Exec exec) {
  if (!(traj.grid() == prob.grid)) throw Error(ErrorCode::DimensionMismatch, "trajectory lives on another grid");
  const DelayGrid& grid = prob.grid;
  const int n = traj.state_dim();
  const int last = grid.last_main();
  const int k1 = grid.k1();
  const int k2 = grid.k2();
  const double h = grid.h();

  ELResidual res;
  const auto partials = kernels::node_partials(prob.lagrangian, traj, nullptr, exec);
  res.p2.resize(n, last + 1);
  res.p3.resize(n, last + 1);
  res.p4.resize(n, last + 1);
  res.p5.resize(n, last + 1);
  for (int i = 0; i <= last; ++i) {
    const Partials& p = partials[static_cast<std::size_t>(i)];
    res.p2.col(i) = p.d_a;
    res.p3.col(i) = p.d_a_delay;
    res.p4.col(i) = p.d_b;
    res.p5.col(i) = p.d_b_delay;
    res.times.push_back(grid.main_time(i));
  }
  res.regimes[0].first = 0;
  res.regimes[0].last = last - k1;
  res.regimes[1].first = last - k1 + 1;
  res.regimes[1].last = last - k2;
  res.regimes[2].first = last - k2 + 1;
  res.regimes[2].last = last;

  // Advanced arguments t + tau are only taken where the shifted node carries
  // quadrature weight, which mirrors the staggering of forward differences.
  auto momentum = [&](int j) -> Eigen::VectorXd {
    Eigen::VectorXd p = res.p4.col(j);
    if (j + k2 <= last - 1) p += res.p5.col(j + k2);
    return p;
  };
  auto rhs = [&](int i) -> Eigen::VectorXd {
    Eigen::VectorXd r = res.p2.col(i);
    if (i + k1 <= last - 1) r += res.p3.col(i + k1);
    return r;
  };

  for (int r = 0; r < 3; ++r) {
    ELRegime& reg = res.regimes[r];
    reg.residual.resize(n, reg.count());
    if (reg.count() < 2) {
      res.warnings.push_back("regime " + std::to_string(r + 1) + " has a single node; derivative borrows a neighbour");
    }
    double sum = 0.0;
    for (int i = reg.first; i <= reg.last; ++i) {
      Eigen::VectorXd dp;
      if (reg.count() < 2) {
        dp = i < last ? (momentum(i + 1) - momentum(i)) / h : (momentum(i) - momentum(i - 1)) / h;
      } else if (i == reg.first) {
        dp = (momentum(i + 1) - momentum(i)) / h;
      } else if (i == reg.last) {
        dp = (momentum(i) - momentum(i - 1)) / h;
      } else {
        dp = (momentum(i + 1) - momentum(i - 1)) / (2.0 * h);
      }
      const Eigen::VectorXd ri = dp - rhs(i);
      if (!ri.allFinite()) throw Error(ErrorCode::NonFiniteValue, "EL residual is not finite");
      reg.residual.col(i - reg.first) = ri;
      if (i == reg.first || i == reg.last) {
        reg.endpoint_max = std::max(reg.endpoint_max, ri.norm());
      } else {
        sum += ri.squaredNorm();
      }
    }
    reg.norm = std::sqrt(h * sum);
  }
  return res;
}

void write_el_residual_csv(std::ostream& out, const ELResidual& res) {
  const auto n = res.p2.rows();
  out << "t,regime";
  for (Eigen::Index k = 0; k < n; ++k) out << ",r" << (k + 1);
  out << ",norm,interior\n";
  for (int r = 0; r < 3; ++r) {
    const ELRegime& reg = res.regimes[r];
    for (int i = reg.first; i <= reg.last; ++i) {
      const auto col = reg.residual.col(i - reg.first);
      out << fmt17(res.times[static_cast<std::size_t>(i)]) << "," << (r + 1);
      for (Eigen::Index k = 0; k < n; ++k) out << "," << fmt17(col(k));
      const bool interior = i != reg.first && i != reg.last;
      out << "," << fmt17(col.norm()) << "," << (interior ? 1 : 0) << "\n";
    }
  }
}

}  // namespace tdelay
