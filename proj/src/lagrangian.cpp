#include "tdelay/lagrangian.hpp"

#include <cmath>
#include <string>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, what + " returned a non-finite value");
}

void require_finite(const Eigen::VectorXd& v, const std::string& what) {
  if (!v.allFinite()) throw Error(ErrorCode::NonFiniteValue, what + " returned a non-finite partial");
}

Eigen::VectorXd stack(const DelayedTuple& tuple) {
  const auto n = tuple.a.size();
  Eigen::VectorXd z(4 * n);
  z << tuple.a, tuple.a_delay, tuple.b, tuple.b_delay;
  return z;
}

Eigen::VectorXd zeros_if_empty(const Eigen::VectorXd& v, Eigen::Index n) {
  return v.size() == 0 ? Eigen::VectorXd::Zero(n) : v;
}

bool same_shape_equal(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
}

void check_psd(const Eigen::MatrixXd& m, const std::string& field, bool strict) {
  if (!m.allFinite()) throw validation_error(field, "must be finite");
  if (!is_symmetric(m)) throw validation_error(field, "must be symmetric");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (strict && !(lo > 1e-12 * scale)) throw validation_error(field, "must be positive definite");
  if (!strict && lo < -1e-12 * scale) throw validation_error(field, "must be positive semidefinite");
}

}  // namespace

bool is_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

DelayedLagrangian::DelayedLagrangian(std::string name, int state_dim, int control_dim, ValueFn value,
                                     PartialsFn partials)
    : name_(std::move(name)),
      state_dim_(state_dim),
      control_dim_(control_dim),
      value_(std::move(value)),
      partials_(std::move(partials)) {
  if (state_dim_ < 1 || control_dim_ < 0) throw Error(ErrorCode::DimensionMismatch, "invalid Lagrangian dimensions");
}

DelayedLagrangian DelayedLagrangian::with_fd_partials(std::string name, int state_dim, int control_dim,
                                                      ValueFn value, double epsilon) {
  auto fd = [value, epsilon](const DelayedTuple& tuple, const Eigen::VectorXd& control) {
    DelayedTuple work = tuple;
    Eigen::VectorXd c = control;
    auto diff = [&](Eigen::VectorXd& slot) {
      Eigen::VectorXd out(slot.size());
      for (Eigen::Index k = 0; k < slot.size(); ++k) {
        const double base = slot(k);
        const double step = epsilon * std::max(1.0, std::abs(base));
        slot(k) = base + step;
        const double up = value(work, c);
        slot(k) = base - step;
        const double down = value(work, c);
        slot(k) = base;
        out(k) = (up - down) / (2.0 * step);
      }
      return out;
    };
    Partials p;
    p.d_a = diff(work.a);
    p.d_a_delay = diff(work.a_delay);
    p.d_b = diff(work.b);
    p.d_b_delay = diff(work.b_delay);
    p.d_c = diff(c);
    return p;
  };
  DelayedLagrangian out(std::move(name), state_dim, control_dim, std::move(value), std::move(fd));
  out.fd_partials_ = true;
  return out;
}

void DelayedLagrangian::check_args(const DelayedTuple& tuple, const Eigen::VectorXd& control) const {
  if (tuple.a.size() != state_dim_ || tuple.a_delay.size() != state_dim_ || tuple.b.size() != state_dim_ ||
      tuple.b_delay.size() != state_dim_ || control.size() != control_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "tuple does not match Lagrangian '" + name_ + "' dimensions");
  }
}

double DelayedLagrangian::eval(const DelayedTuple& tuple, const Eigen::VectorXd& control) const {
  check_args(tuple, control);
  const double v = value_(tuple, control);
  require_finite(v, "Lagrangian '" + name_ + "'");
  return v;
}

Partials DelayedLagrangian::partials(const DelayedTuple& tuple, const Eigen::VectorXd& control) const {
  check_args(tuple, control);
  Partials p = partials_(tuple, control);
  if (p.d_a.size() != state_dim_ || p.d_a_delay.size() != state_dim_ || p.d_b.size() != state_dim_ ||
      p.d_b_delay.size() != state_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "partials of '" + name_ + "' have wrong size");
  }
  if (p.d_c.size() == 0 && control_dim_ == 0) p.d_c = Eigen::VectorXd();
  if (p.d_c.size() != control_dim_) throw Error(ErrorCode::DimensionMismatch, "control partial has wrong size");
  const std::string what = "Lagrangian '" + name_ + "'";
  require_finite(p.d_a, what);
  require_finite(p.d_a_delay, what);
  require_finite(p.d_b, what);
  require_finite(p.d_b_delay, what);
  require_finite(p.d_c, what);
  return p;
}

DelayedLagrangian zero_lagrangian(int state_dim) { return constant_lagrangian(state_dim, 0.0); }

DelayedLagrangian constant_lagrangian(int state_dim, double value) {
  const auto n = state_dim;
  return DelayedLagrangian(
      value == 0.0 ? "zero" : "constant", state_dim, 0,
      [value](const DelayedTuple&, const Eigen::VectorXd&) { return value; },
      [n](const DelayedTuple&, const Eigen::VectorXd&) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        return Partials{z, z, z, z, {}};
      });
}

DelayedLagrangian quadratic_lagrangian(const Eigen::MatrixXd& weight, const Eigen::VectorXd& linear) {
  if (weight.rows() % 4 != 0 || weight.rows() != weight.cols() || linear.size() != weight.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "quadratic Lagrangian needs a 4N x 4N weight and 4N linear term");
  }
  if (!is_symmetric(weight)) throw validation_error("lagrangian.weight", "must be symmetric");
  const int n = static_cast<int>(weight.rows() / 4);
  return DelayedLagrangian(
      "quadratic", n, 0,
      [weight, linear](const DelayedTuple& tuple, const Eigen::VectorXd&) {
        const Eigen::VectorXd z = stack(tuple);
        return 0.5 * z.dot(weight * z) + linear.dot(z);
      },
      [weight, linear, n](const DelayedTuple& tuple, const Eigen::VectorXd&) {
        const Eigen::VectorXd g = weight * stack(tuple) + linear;
        return Partials{g.segment(0, n), g.segment(n, n), g.segment(2 * n, n), g.segment(3 * n, n), {}};
      });
}

QuadraticLagrangianWeights QuadraticLagrangianWeights::normalized() const {
  const auto n = a.rows();
  if (n < 1) throw validation_error("lagrangian.params.a", "must be a non-empty square matrix");
  QuadraticLagrangianWeights out = *this;
  const std::pair<const Eigen::MatrixXd*, const char*> blocks[] = {
      {&a, "a"}, {&a_delay, "a_delay"}, {&b, "b"}, {&b_delay, "b_delay"}};
  for (auto [m, name] : blocks) {
    const std::string field = std::string("lagrangian.params.") + name;
    if (m->rows() != n || m->cols() != n) throw validation_error(field, "must be state_dim x state_dim");
    if (!m->allFinite()) throw validation_error(field, "must be finite");
    if (!is_symmetric(*m)) throw validation_error(field, "must be symmetric");
  }
  out.lin_a = zeros_if_empty(lin_a, n);
  out.lin_a_delay = zeros_if_empty(lin_a_delay, n);
  out.lin_b = zeros_if_empty(lin_b, n);
  out.lin_b_delay = zeros_if_empty(lin_b_delay, n);
  const std::pair<const Eigen::VectorXd*, const char*> lins[] = {
      {&out.lin_a, "lin_a"}, {&out.lin_a_delay, "lin_a_delay"}, {&out.lin_b, "lin_b"}, {&out.lin_b_delay, "lin_b_delay"}};
  for (auto [v, name] : lins) {
    if (v->size() != n) throw validation_error(std::string("lagrangian.params.") + name, "must have state_dim entries");
  }
  return out;
}

bool QuadraticLagrangianWeights::operator==(const QuadraticLagrangianWeights& o) const {
  return same_shape_equal(a, o.a) && same_shape_equal(a_delay, o.a_delay) && same_shape_equal(b, o.b) &&
         same_shape_equal(b_delay, o.b_delay) && same_shape_equal(lin_a, o.lin_a) &&
         same_shape_equal(lin_a_delay, o.lin_a_delay) && same_shape_equal(lin_b, o.lin_b) &&
         same_shape_equal(lin_b_delay, o.lin_b_delay);
}

DelayedLagrangian quadratic_lagrangian(const QuadraticLagrangianWeights& weights) {
  const QuadraticLagrangianWeights w = weights.normalized();
  const auto n = w.state_dim();
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  big.block(0, 0, n, n) = 2.0 * w.a;
  big.block(n, n, n, n) = 2.0 * w.a_delay;
  big.block(2 * n, 2 * n, n, n) = 2.0 * w.b;
  big.block(3 * n, 3 * n, n, n) = 2.0 * w.b_delay;
  Eigen::VectorXd lin(4 * n);
  lin << w.lin_a, w.lin_a_delay, w.lin_b, w.lin_b_delay;
  return quadratic_lagrangian(big, lin);
}

DelayedLagrangian anharmonic_lagrangian(int state_dim, const AnharmonicParams& p) {
  return DelayedLagrangian(
      "anharmonic", state_dim, 0,
      [p](const DelayedTuple& x, const Eigen::VectorXd&) {
        const double a2 = x.a.squaredNorm();
        return 0.5 * x.b.squaredNorm() + 0.5 * p.delay_kinetic * x.b_delay.squaredNorm() +
               0.5 * p.stiffness * a2 + 0.25 * p.quartic * a2 * a2 + p.coupling * x.a.dot(x.a_delay) +
               p.forcing * std::sin(x.t) * x.a.sum();
      },
      [p](const DelayedTuple& x, const Eigen::VectorXd&) {
        const double a2 = x.a.squaredNorm();
        Partials out;
        out.d_a = (p.stiffness + p.quartic * a2) * x.a + p.coupling * x.a_delay +
                  Eigen::VectorXd::Constant(x.a.size(), p.forcing * std::sin(x.t));
        out.d_a_delay = p.coupling * x.a;
        out.d_b = x.b;
        out.d_b_delay = p.delay_kinetic * x.b_delay;
        return out;
      });
}

RunningCost::RunningCost(int state_dim, int control_dim, ValueFn value, PartialsFn partials, double coercivity_rho)
    : state_dim_(state_dim),
      control_dim_(control_dim),
      rho_(coercivity_rho),
      value_(std::move(value)),
      partials_(std::move(partials)) {
  if (state_dim_ < 1 || control_dim_ < 1) throw Error(ErrorCode::DimensionMismatch, "invalid running cost dimensions");
  if (!(rho_ >= 0.0)) throw validation_error("cost.rho", "must be >= 0");
}

double RunningCost::eval(double t, const Eigen::VectorXd& a, const Eigen::VectorXd& b_delay,
                         const Eigen::VectorXd& c) const {
  if (a.size() != state_dim_ || b_delay.size() != state_dim_ || c.size() != control_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "running cost argument sizes");
  }
  const double v = value_(t, a, b_delay, c);
  require_finite(v, "running cost");
  return v;
}

RunningCostPartials RunningCost::partials(double t, const Eigen::VectorXd& a, const Eigen::VectorXd& b_delay,
                                          const Eigen::VectorXd& c) const {
  if (a.size() != state_dim_ || b_delay.size() != state_dim_ || c.size() != control_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "running cost argument sizes");
  }
  RunningCostPartials p = partials_(t, a, b_delay, c);
  require_finite(p.d_a, "running cost");
  require_finite(p.d_b_delay, "running cost");
  require_finite(p.d_c, "running cost");
  return p;
}

QuadraticCostSpec QuadraticCostSpec::normalized() const {
  const auto n = Q.rows();
  const auto m = R.rows();
  if (n < 1 || Q.cols() != n) throw validation_error("cost.Q", "must be a non-empty square matrix");
  if (S.rows() != n || S.cols() != n) throw validation_error("cost.S", "must be state_dim x state_dim");
  if (m < 1 || R.cols() != m) throw validation_error("cost.R", "must be a non-empty square matrix");
  check_psd(Q, "cost.Q", false);
  check_psd(S, "cost.S", false);
  check_psd(R, "cost.R", true);
  QuadraticCostSpec out = *this;
  out.q = zeros_if_empty(q, n);
  out.s = zeros_if_empty(s, n);
  out.r = zeros_if_empty(r, m);
  if (out.q.size() != n || !out.q.allFinite()) throw validation_error("cost.q", "must have state_dim finite entries");
  if (out.s.size() != n || !out.s.allFinite()) throw validation_error("cost.s", "must have state_dim finite entries");
  if (out.r.size() != m || !out.r.allFinite()) throw validation_error("cost.r", "must have control_dim finite entries");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw validation_error("cost.rho", "must be a finite value >= 0");
  return out;
}

bool QuadraticCostSpec::operator==(const QuadraticCostSpec& o) const {
  return same_shape_equal(Q, o.Q) && same_shape_equal(S, o.S) && same_shape_equal(R, o.R) &&
         same_shape_equal(q, o.q) && same_shape_equal(s, o.s) && same_shape_equal(r, o.r) && rho == o.rho;
}

RunningCost QuadraticCostSpec::to_running_cost() const {
  const QuadraticCostSpec c = normalized();
  return RunningCost(
      c.state_dim(), c.control_dim(),
      [c](double, const Eigen::VectorXd& a, const Eigen::VectorXd& bd, const Eigen::VectorXd& u) {
        return a.dot(c.Q * a) + bd.dot(c.S * bd) + u.dot(c.R * u) + c.q.dot(a) + c.s.dot(bd) + c.r.dot(u);
      },
      [c](double, const Eigen::VectorXd& a, const Eigen::VectorXd& bd, const Eigen::VectorXd& u) {
        return RunningCostPartials{2.0 * c.Q * a + c.q, 2.0 * c.S * bd + c.s, 2.0 * c.R * u + c.r};
      },
      c.rho);
}

Eigen::VectorXd dynamics_residual(const DelayedTuple& tuple, const Eigen::VectorXd& control,
                                  const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return tuple.b - A * tuple.a_delay - B * control;
}

DelayedLagrangian make_penalized(const RunningCost& cost, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 double c_n) {
  if (!std::isfinite(c_n) || c_n < 0.0) {
    throw Error(ErrorCode::NonPositivePenalty, "penalty weight must be finite and >= 0");
  }
  const int n = cost.state_dim();
  const int m = cost.control_dim();
  if (A.rows() != n || A.cols() != n) throw Error(ErrorCode::DimensionMismatch, "A must be N x N");
  if (B.rows() != n || B.cols() != m) throw Error(ErrorCode::DimensionMismatch, "B must be N x m");
  return DelayedLagrangian(
      "penalized", n, m,
      [cost, A, B, c_n](const DelayedTuple& x, const Eigen::VectorXd& c) {
        const double l = cost.eval(x.t, x.a, x.b_delay, c);
        if (c_n == 0.0) return l;
        return l + 0.5 * c_n * dynamics_residual(x, c, A, B).squaredNorm();
      },
      [cost, A, B, c_n](const DelayedTuple& x, const Eigen::VectorXd& c) {
        const RunningCostPartials lp = cost.partials(x.t, x.a, x.b_delay, c);
        const Eigen::VectorXd r = dynamics_residual(x, c, A, B);
        Partials p;
        p.d_a = lp.d_a;
        p.d_a_delay = -c_n * (A.transpose() * r);
        p.d_b = c_n * r;
        p.d_b_delay = lp.d_b_delay;
        p.d_c = lp.d_c - c_n * (B.transpose() * r);
        return p;
      });
}

}  // namespace tdelay
