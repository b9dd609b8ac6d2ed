#include "tdelay/history.hpp"

#include <cmath>
#include <string>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

constexpr double kDomainTol = 1e-12;

Eigen::VectorXd eval_pieces(const std::vector<PolynomialPiece>& pieces, double t) {
  for (const auto& piece : pieces) {
    if (t >= piece.t_begin - kDomainTol && t <= piece.t_end + kDomainTol) return piece.eval(t);
  }
  throw Error(ErrorCode::IndexOutOfRange, "history queried outside its domain at t=" + std::to_string(t));
}

void validate_pieces(const std::vector<PolynomialPiece>& pieces, double begin, double end, int dim,
                     const std::string& field) {
  if (pieces.empty()) throw validation_error(field, "must contain at least one piece");
  double cursor = begin;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& piece = pieces[k];
    const std::string where = field + "[" + std::to_string(k) + "]";
    if (piece.coefficients.rows() != dim) throw validation_error(where + ".coefficients", "must have state_dim rows");
    if (piece.coefficients.cols() < 1) throw validation_error(where + ".coefficients", "must have at least one coefficient");
    if (!piece.coefficients.allFinite()) throw validation_error(where + ".coefficients", "must be finite");
    if (std::abs(piece.t_begin - cursor) > kDomainTol) {
      throw validation_error(where + ".interval", "pieces must be contiguous and start at the domain start");
    }
    if (!(piece.t_end > piece.t_begin)) throw validation_error(where + ".interval", "must have t_end > t_begin");
    cursor = piece.t_end;
  }
  if (std::abs(cursor - end) > kDomainTol) throw validation_error(field, "pieces must end exactly at the domain end");
}

}  // namespace

Eigen::VectorXd PolynomialPiece::eval(double t) const {
  // Horner per component.
  Eigen::VectorXd out = coefficients.col(coefficients.cols() - 1);
  for (Eigen::Index j = coefficients.cols() - 2; j >= 0; --j) out = out * t + coefficients.col(j);
  return out;
}

bool PolynomialPiece::operator==(const PolynomialPiece& other) const {
  return t_begin == other.t_begin && t_end == other.t_end &&
         coefficients.rows() == other.coefficients.rows() &&
         coefficients.cols() == other.coefficients.cols() && coefficients == other.coefficients;
}

HistorySpec HistorySpec::constant(const Eigen::VectorXd& value, double tau1, double tau2) {
  return affine(value, Eigen::VectorXd::Zero(value.size()), tau1, tau2);
}

HistorySpec HistorySpec::affine(const Eigen::VectorXd& offset, const Eigen::VectorXd& slope, double tau1,
                                double tau2) {
  if (offset.size() != slope.size()) throw Error(ErrorCode::DimensionMismatch, "offset/slope size differ");
  Eigen::MatrixXd coeffs(offset.size(), 2);
  coeffs.col(0) = offset;
  coeffs.col(1) = slope;
  HistorySpec spec;
  spec.state_dim = static_cast<int>(offset.size());
  spec.theta1.push_back({-tau1, -tau2, coeffs});
  spec.theta2.push_back({-tau2, 0.0, coeffs});
  return spec;
}

void HistorySpec::validate(double tau1, double tau2) const {
  if (state_dim < 1) throw validation_error("history.state_dim", "must be >= 1");
  validate_pieces(theta1, -tau1, -tau2, state_dim, "history.theta1");
  validate_pieces(theta2, -tau2, 0.0, state_dim, "history.theta2");
}

Eigen::VectorXd HistorySpec::eval(double t, double tau2) const {
  if (t >= -tau2 - kDomainTol) return eval_pieces(theta2, t);
  return eval_pieces(theta1, t);
}

}  // namespace tdelay
