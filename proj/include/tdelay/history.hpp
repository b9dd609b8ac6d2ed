#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tdelay {

/// One polynomial piece of a vector-valued function on [t_begin, t_end].
/// Row k of `coefficients` holds component k in powers of absolute time:
/// x_k(t) = sum_j coefficients(k, j) * t^j.
struct PolynomialPiece {
  double t_begin = 0.0;
  double t_end = 0.0;
  Eigen::MatrixXd coefficients;

  Eigen::VectorXd eval(double t) const;
  bool operator==(const PolynomialPiece& other) const;
};

/// Prescribed initial function: theta1 on [-tau1, -tau2], theta2 on
/// [-tau2, 0]. Each is a contiguous, ordered list of polynomial pieces.
struct HistorySpec {
  int state_dim = 0;
  std::vector<PolynomialPiece> theta1;
  std::vector<PolynomialPiece> theta2;

  static HistorySpec constant(const Eigen::VectorXd& value, double tau1, double tau2);
  /// theta(t) = offset + slope * t on the whole of [-tau1, 0].
  static HistorySpec affine(const Eigen::VectorXd& offset, const Eigen::VectorXd& slope, double tau1,
                            double tau2);

  /// Throws ValidationError unless the pieces cover [-tau1,-tau2] and
  /// [-tau2,0] exactly (to 1e-12) with consistent dimensions.
  void validate(double tau1, double tau2) const;

  /// theta2 on [-tau2, 0], theta1 before that.
  Eigen::VectorXd eval(double t, double tau2) const;

  bool operator==(const HistorySpec& other) const = default;
};

}  // namespace tdelay
