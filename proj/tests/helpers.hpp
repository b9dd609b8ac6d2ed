#pragma once

#include <Eigen/Dense>
#include <random>

#include "tdelay/lagrangian.hpp"
#include "tdelay/penalty.hpp"
#include "tdelay/variational.hpp"

namespace test {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double shift) {
  const Eigen::MatrixXd g = random_matrix(rng, n, n);
  return g * g.transpose() / static_cast<double>(n) + shift * Eigen::MatrixXd::Identity(n, n);
}

inline tdelay::DelayedTuple random_tuple(std::mt19937_64& rng, int n) {
  tdelay::DelayedTuple t;
  std::uniform_real_distribution<double> ud(0.0, 2.0);
  t.t = ud(rng);
  t.a = random_matrix(rng, n, 1);
  t.a_delay = random_matrix(rng, n, 1);
  t.b = random_matrix(rng, n, 1);
  t.b_delay = random_matrix(rng, n, 1);
  return t;
}

/// Random strictly convex quadratic L = 1/2 z^T W z + w^T z.
struct RandomQuadratic {
  Eigen::MatrixXd W;
  Eigen::VectorXd w;
};

inline RandomQuadratic random_quadratic(std::mt19937_64& rng, int n) {
  RandomQuadratic q;
  q.W = random_spd(rng, 4 * n, 0.5);
  q.w = random_matrix(rng, 4 * n, 1, 0.5);
  return q;
}

/// Scalar LQ instance: A = -1, B = 1, l = a^2 + bd^2 + c^2, theta = 1, alpha = 0.
inline tdelay::ControlProblem lq_instance(const tdelay::DelayGrid& grid) {
  tdelay::QuadraticCostSpec spec;
  spec.Q = Eigen::MatrixXd::Identity(1, 1);
  spec.S = Eigen::MatrixXd::Identity(1, 1);
  spec.R = Eigen::MatrixXd::Identity(1, 1);
  spec = spec.normalized();
  return tdelay::ControlProblem{grid,
                                Eigen::MatrixXd::Constant(1, 1, -1.0),
                                Eigen::MatrixXd::Constant(1, 1, 1.0),
                                spec.to_running_cost(),
                                tdelay::HistorySpec::constant(vec({1.0}), grid.tau1().to_double(),
                                                              grid.tau2().to_double()),
                                vec({0.0}),
                                spec};
}

}  // namespace test
