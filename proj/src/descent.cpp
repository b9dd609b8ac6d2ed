#include "tdelay/descent.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

constexpr double kMinStep = 1e-16;
constexpr double kApproxArmijoDelta = 0.1;

// Two-loop recursion over stored (s, y) pairs.
Eigen::VectorXd lbfgs_direction(const std::deque<Eigen::VectorXd>& s, const std::deque<Eigen::VectorXd>& y,
                                const Eigen::VectorXd& g) {
  Eigen::VectorXd q = g;
  const std::size_t m = s.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / y[k].dot(s[k]);
    alpha[k] = rho[k] * s[k].dot(q);
    q -= alpha[k] * y[k];
  }
  if (m > 0) q *= s.back().dot(y.back()) / y.back().squaredNorm();
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * y[k].dot(q);
    q += (alpha[k] - beta) * s[k];
  }
  return -q;
}

}  // namespace

void InnerOptions::validate() const {
  if (!(grad_tol > 0.0)) throw validation_error("inner.grad_tol", "must be > 0");
  if (max_iters < 0) throw validation_error("inner.max_iters", "must be >= 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw validation_error("inner.armijo_c", "must lie in (0, 1)");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw validation_error("inner.backtrack_factor", "must lie in (0, 1)");
  }
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) throw validation_error("inner.initial_step", "must be > 0");
  if (lbfgs_memory < 1) throw validation_error("inner.lbfgs_memory", "must be >= 1");
}

double line_search(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& grad,
                   const Eigen::VectorXd& direction, const InnerOptions& opts, double step0) {
  const double slope = grad.dot(direction);
  if (!(slope < 0.0)) throw Error(ErrorCode::LineSearchFailure, "search direction is not a descent direction");
  const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
  const double delta = std::max(opts.armijo_c, kApproxArmijoDelta);
  for (double s = step0; s >= kMinStep; s *= opts.backtrack_factor) {
    double trial;
    try {
      trial = f.value(x + s * direction);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue) throw;
      continue;
    }
    if (!std::isfinite(trial)) continue;
    if (std::abs(s * slope) > resolution) {
      if (trial <= fx + opts.armijo_c * s * slope) return s;
      continue;
    }
    // Predicted decrease below the resolution of f, where the comparison of
    // values is noise: judge the step by the directional derivative
    // (approximate Armijo, Hager-Zhang).
    if (trial > fx + resolution) continue;
    Eigen::VectorXd g_trial;
    f.value_and_gradient(x + s * direction, g_trial);
    if (g_trial.dot(direction) <= (2.0 * delta - 1.0) * slope) return s;
  }
  throw Error(ErrorCode::LineSearchFailure, "no Armijo step above 1e-16");
}

MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& init, const InnerOptions& opts) {
  opts.validate();
  MinimizeResult out{init, {}};
  InnerReport& rep = out.report;
  Eigen::VectorXd& x = out.x;
  Eigen::VectorXd g;
  double fx = f.value_and_gradient(x, g);
  if (!std::isfinite(fx) || !g.allFinite()) throw Error(ErrorCode::NonFiniteValue, "objective not finite at start");
  rep.value_history.push_back(fx);

  std::deque<Eigen::VectorXd> s_mem, y_mem;
  Eigen::VectorXd last_s, last_y;
  rep.stop_reason = "max_iters";
  while (true) {
    const double gnorm = g.norm();
    if (gnorm <= opts.grad_tol) {
      rep.converged = true;
      rep.stop_reason = "grad_tol";
      break;
    }
    if (rep.iterations >= opts.max_iters) break;

    Eigen::VectorXd d;
    double step0 = opts.initial_step;
    if (opts.direction == Direction::lbfgs) {
      d = lbfgs_direction(s_mem, y_mem, g);
      if (!(g.dot(d) < 0.0) || !d.allFinite()) {
        s_mem.clear();
        y_mem.clear();
        d = -g;
      }
      if (s_mem.empty()) step0 = std::min(opts.initial_step, 1.0 / gnorm);
    } else {
      d = -g;
      if (opts.bb_warm_start && last_s.size() > 0) {
        const double sy = last_s.dot(last_y);
        if (sy > 0.0) step0 = last_s.squaredNorm() / sy;
      }
    }

    const double step = line_search(f, x, fx, g, d, opts, step0);
    Eigen::VectorXd x_new = x + step * d;
    if (x_new == x) {
      rep.stop_reason = "stalled";
      break;
    }
    Eigen::VectorXd g_new;
    const double f_new = f.value_and_gradient(x_new, g_new);
    if (!std::isfinite(f_new) || !g_new.allFinite()) throw Error(ErrorCode::NonFiniteValue, "objective not finite");
    last_s = x_new - x;
    last_y = g_new - g;
    if (opts.direction == Direction::lbfgs && last_s.dot(last_y) > 1e-12 * last_s.norm() * last_y.norm()) {
      s_mem.push_back(last_s);
      y_mem.push_back(last_y);
      if (static_cast<int>(s_mem.size()) > opts.lbfgs_memory) {
        s_mem.pop_front();
        y_mem.pop_front();
      }
    }
    x = std::move(x_new);
    g = std::move(g_new);
    fx = f_new;
    ++rep.iterations;
    rep.value_history.push_back(fx);
  }
  rep.final_value = fx;
  rep.final_grad_norm = g.norm();
  return out;
}

}  // namespace tdelay
