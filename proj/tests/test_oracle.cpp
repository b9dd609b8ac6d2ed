#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "tdelay/error.hpp"
#include "tdelay/oracle.hpp"

using namespace tdelay;
using test::vec;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

QuadraticCostSpec random_cost(std::mt19937_64& rng, int n, int m) {
  QuadraticCostSpec c;
  const Eigen::MatrixXd gq = test::random_matrix(rng, n, n);
  const Eigen::MatrixXd gs = test::random_matrix(rng, n, n);
  c.Q = gq * gq.transpose();
  c.S = gs * gs.transpose();
  c.R = test::random_spd(rng, m, 0.5);
  c.q = test::random_matrix(rng, n, 1);
  c.r = test::random_matrix(rng, m, 1);
  return c.normalized();
}

ControlProblem random_problem(std::mt19937_64& rng, const DelayGrid& g, int n, int m) {
  const auto c = random_cost(rng, n, m);
  return {g,
          test::random_matrix(rng, n, n, 0.5),
          test::random_matrix(rng, n, m),
          c.to_running_cost(),
          HistorySpec::affine(test::random_matrix(rng, n, 1), test::random_matrix(rng, n, 1),
                              g.tau1().to_double(), g.tau2().to_double()),
          test::random_matrix(rng, n, 1),
          c};
}

// A random pair satisfying the discrete dynamics and all pins; the last free
// control is chosen to land on alpha (B must be square and invertible).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> random_feasible_pair(std::mt19937_64& rng, const ControlProblem& p) {
  const auto& g = p.grid;
  const int n = p.state_dim();
  const int last = g.last_main();
  Eigen::MatrixXd x(n, g.n_nodes());
  for (int k = 0; k <= g.n_history(); ++k) x.col(k) = p.history.eval(g.time(k), g.tau2().to_double());
  Eigen::MatrixXd u = test::random_matrix(rng, p.control_dim(), g.n_main(), 0.5);
  u.col(0).setZero();
  for (int i = 0; i < last; ++i) {
    const int gi = g.n_history() + i;
    if (i == last - 1) {
      u.col(i) = p.B.fullPivLu().solve((p.alpha - x.col(gi)) / g.h() - p.A * x.col(gi - g.k1()));
    }
    x.col(gi + 1) = x.col(gi) + g.h() * (p.A * x.col(gi - g.k1()) + p.B * u.col(i));
  }
  u.col(last) = u.col(last - 1);
  return {x, u};
}

double mos_scalar_error(double a, double h, double upto) {
  const DelayGrid g = DelayGrid::build(2.0, 0.5, 0.25, h);
  const auto u = ControlPath::zero(g, 1);
  const auto x = oracle::integrate_mos(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Zero(1, 1), u,
                                       HistorySpec::constant(vec({1.0}), 0.5, 0.25), g);
  const double tau = 0.5;
  double err = 0.0;
  for (int i = 0; i < g.n_main(); ++i) {
    const double t = g.main_time(i);
    if (t > upto + 1e-12) break;
    // Method of steps by hand for x' = a x(t - tau), x = 1 on the history.
    double exact;
    if (t <= tau) {
      exact = 1.0 + a * t;
    } else if (t <= 2.0 * tau) {
      exact = 1.0 + a * tau + a * (t - tau) + a * a * (t - tau) * (t - tau) / 2.0;
    } else {
      const double r = t - 2.0 * tau;
      exact = 1.0 + 2.0 * a * tau + a * a * tau * tau / 2.0 +
              a * ((1.0 + a * tau) * r + a * r * r / 2.0 + a * a * r * r * r / 6.0);
    }
    err = std::max(err, std::abs(x(0, g.global_index(i)) - exact));
  }
  return err;
}

}  // namespace

TEST_CASE("integrate_mos without delay feedback is a trapezoid sum of B u") {
  std::mt19937_64 rng(31);
  const DelayGrid g = DelayGrid::build(2.0, 0.5, 0.25, 0.05);
  const Eigen::MatrixXd B = test::random_matrix(rng, 2, 2);
  auto u = ControlPath::zero(g, 2);
  for (int i = 1; i < g.n_main(); ++i) u.set_value(i, vec({std::sin(g.main_time(i)), std::cos(3.0 * g.main_time(i))}));
  const auto hist = HistorySpec::constant(vec({0.5, -1.0}), 0.5, 0.25);
  const auto x = oracle::integrate_mos(Eigen::MatrixXd::Zero(2, 2), B, u, hist, g);
  Eigen::VectorXd acc = vec({0.5, -1.0});
  for (int i = 1; i < g.n_main(); ++i) {
    acc += 0.5 * g.h() * B * (u.value(i - 1) + u.value(i));
    CHECK((x.col(g.global_index(i)) - acc).cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (int k = 0; k <= g.n_history(); ++k) CHECK(x.col(k) == hist.eval(g.time(k), 0.25));
}

TEST_CASE("integrate_mos on the first delay interval is exact") {
  for (double a : {-1.0, 0.5, 2.0}) {
    CHECK(mos_scalar_error(a, 0.05, 0.5) <= 1e-13);
  }
}

TEST_CASE("integrate_mos on the second delay interval") {
  // Piecewise-linear delayed term: trapezoid is exact up to roundoff.
  for (double h : {0.05, 0.025, 0.0125}) CHECK(mos_scalar_error(-1.0, h, 1.0) <= h * h);
  // Third interval: quadratic delayed term, second-order convergence.
  const double e1 = mos_scalar_error(-1.0, 0.05, 1.5);
  const double e2 = mos_scalar_error(-1.0, 0.025, 1.5);
  CHECK(e1 <= 0.05 * 0.05);
  CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("forward-difference residual of the integrator path decays with h") {
  // The trapezoid path differentiated by forward differences is first order.
  double prev = 0.0;
  for (double h : {0.05, 0.025, 0.0125}) {
    const DelayGrid g = DelayGrid::build(2.0, 0.5, 0.25, h);
    auto p = test::lq_instance(g);
    auto u = ControlPath::zero(g, 1);
    for (int i = 1; i < g.n_main(); ++i) u.set_value(i, vec({std::sin(2.0 * g.main_time(i))}));
    const Eigen::MatrixXd x = oracle::integrate_mos(p.A, p.B, u, p.history, g);
    const Eigen::MatrixXd phi = compute_phi(p, x, u.values());
    double l2 = 0.0;
    for (int i = 0; i < g.last_main(); ++i) l2 += g.h() * phi.col(i).squaredNorm();
    l2 = std::sqrt(l2);
    CHECK(l2 <= 2.0 * h);
    if (prev > 0.0) CHECK(prev / l2 >= 1.8);
    prev = l2;
  }
}

TEST_CASE("lq_direct_solve on the zero problem") {
  const DelayGrid g = DelayGrid::build(1.0, 0.5, 0.25, 0.1);
  QuadraticCostSpec c;
  c.Q = c.S = Eigen::MatrixXd::Zero(1, 1);
  c.R = Eigen::MatrixXd::Identity(1, 1);
  c = c.normalized();
  const ControlProblem p{g, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1), c.to_running_cost(),
                         HistorySpec::constant(vec({0.0}), 0.5, 0.25), vec({0.0}), c};
  const auto sol = oracle::lq_direct_solve(p);
  CHECK(std::abs(sol.objective) <= 1e-14);
  CHECK(sol.u.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(sol.residual <= 1e-12);
}

TEST_CASE("lq_direct_solve satisfies the dynamics and bounds feasible pairs") {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 6; ++k) {
    const int n = 1 + k % 3;
    const DelayGrid g = DelayGrid::build(Rational(2), Rational(1, 2), Rational(1, 4), Rational(1, 10 + 5 * k));
    const auto p = random_problem(rng, g, n, n);
    const auto sol = oracle::lq_direct_solve(p);
    CHECK(sol.residual <= 1e-8);
    CHECK(sol.multipliers.cols() == g.last_main());
    const Eigen::MatrixXd phi = compute_phi(p, sol.x, sol.u);
    CHECK(phi.leftCols(g.last_main()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(sol.x.col(g.n_nodes() - 1).isApprox(p.alpha, 1e-12));
    CHECK(sol.u.col(0).isZero(0.0));
    CHECK(sol.objective == doctest::Approx(oracle::lq_cost(p, sol.x, sol.u)).epsilon(1e-12));
    for (int trial = 0; trial < 100 / 6 + 1; ++trial) {
      const auto [x, u] = random_feasible_pair(rng, p);
      REQUIRE(compute_phi(p, x, u).leftCols(g.last_main()).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(sol.objective <= oracle::lq_cost(p, x, u) + 1e-8);
    }
  }
}

TEST_CASE("lq_direct_solve errors") {
  const DelayGrid g = DelayGrid::build(1.0, 0.5, 0.25, 0.1);
  auto p = test::lq_instance(g);
  p.B.setZero();
  p.A.setZero();
  p.alpha = vec({3.0});
  CHECK(code_of([&] { oracle::lq_direct_solve(p); }) == ErrorCode::SingularKKT);
  auto q = test::lq_instance(g);
  q.quadratic.reset();
  CHECK(code_of([&] { oracle::lq_direct_solve(q); }) == ErrorCode::InvalidArgument);
  const DelayGrid big = DelayGrid::build(2.0, 0.5, 0.25, 1.0 / 2000);
  CHECK(code_of([&] { oracle::lq_direct_solve(test::lq_instance(big)); }) == ErrorCode::ProblemTooLarge);
}

TEST_CASE("quadratic_variational_solve") {
  SUBCASE("kinetic energy gives the straight line") {
    const DelayGrid g = DelayGrid::build(1.0, 0.5, 0.25, 0.05);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(4, 4);
    W(2, 2) = 2.0;
    const auto sol = oracle::quadratic_variational_solve(g, W, Eigen::VectorXd::Zero(4),
                                                         HistorySpec::constant(vec({0.0}), 0.5, 0.25), vec({1.0}));
    for (int i = 0; i < g.n_main(); ++i) CHECK(sol.x(0, g.global_index(i)) == doctest::Approx(g.main_time(i)));
    CHECK(sol.objective == doctest::Approx(1.0));
  }
  SUBCASE("matches the discrete functional at its minimizer") {
    std::mt19937_64 rng(33);
    const DelayGrid g = DelayGrid::build(Rational(2), Rational(1, 2), Rational(1, 4), Rational(1, 20));
    const auto q = test::random_quadratic(rng, 2);
    const auto hist = HistorySpec::affine(vec({1.0, -1.0}), vec({0.2, 0.3}), 0.5, 0.25);
    const auto sol = oracle::quadratic_variational_solve(g, q.W, q.w, hist, vec({0.0, 1.0}));
    const VariationalProblem p{g, quadratic_lagrangian(q.W, q.w), hist, vec({0.0, 1.0})};
    const auto tr = Trajectory::init(g, hist, p.alpha, InitMode::custom, &sol.x);
    CHECK(functional_value(p, tr) == doctest::Approx(sol.objective).epsilon(1e-10));
    CHECK(gradient(p, tr).values.cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("fd_gradient") {
  auto sq = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  const Eigen::VectorXd g = oracle::fd_gradient(sq, vec({1.0, 2.0}));
  CHECK(std::abs(g(0) - 2.0) <= 1e-8);
  CHECK(std::abs(g(1) - 4.0) <= 1e-8);
  CHECK(oracle::fd_gradient([](const Eigen::VectorXd&) { return 7.0; }, vec({1.0, 2.0})).isZero(0.0));

  // Error falls with epsilon until roundoff takes over.
  auto f = [](const Eigen::VectorXd& x) { return std::exp(x(0)) * std::sin(x(1)); };
  const Eigen::VectorXd x = vec({0.3, 0.7});
  const Eigen::VectorXd exact = vec({std::exp(0.3) * std::sin(0.7), std::exp(0.3) * std::cos(0.7)});
  double prev = INFINITY;
  std::string trace;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const double err = (oracle::fd_gradient(f, x, eps) - exact).cwiseAbs().maxCoeff();
    CHECK(err < prev);
    prev = err;
    trace += " " + std::to_string(err);
  }
  MESSAGE("fd error for eps 1e-1..1e-5:", trace);
}

TEST_CASE("fd_gradient agrees with the analytic gradient of a delayed quadratic") {
  std::mt19937_64 rng(34);
  const DelayGrid g = DelayGrid::build(Rational(2), Rational(1, 2), Rational(1, 4), Rational(1, 30));
  const auto q = test::random_quadratic(rng, 2);
  const VariationalProblem p{g, quadratic_lagrangian(q.W, q.w),
                             HistorySpec::affine(vec({1.0, 0.0}), vec({0.0, 1.0}), 0.5, 0.25), vec({0.5, 0.5})};
  auto tr = p.initial();
  tr.set_free_values(test::random_matrix(rng, tr.n_free(), 1));
  const Objective f = variational_objective(p, tr);
  Eigen::VectorXd grad;
  f.value_and_gradient(tr.free_values(), grad);
  CHECK(oracle::relative_gradient_error(grad, oracle::fd_gradient(f.value, tr.free_values())) <= 1e-5);
}

TEST_CASE("relative_gradient_error") {
  CHECK(oracle::relative_gradient_error(vec({1.0, 2.0}), vec({1.0, 2.0})) == 0.0);
  CHECK(oracle::relative_gradient_error(vec({1.1, 2.0}), vec({1.0, 2.0})) == doctest::Approx(0.1));
  // Near-zero coordinates are measured against 1e-3 of the largest entry.
  CHECK(oracle::relative_gradient_error(vec({1e-9, 1.0}), vec({0.0, 1.0})) == doctest::Approx(1e-6));
  CHECK(oracle::relative_gradient_error(Eigen::VectorXd(), Eigen::VectorXd()) == 0.0);
  CHECK_THROWS_AS(oracle::relative_gradient_error(vec({1.0}), vec({1.0, 2.0})), Error);
}
