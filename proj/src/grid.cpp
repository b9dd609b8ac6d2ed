#include "tdelay/grid.hpp"

#include <limits>
#include <string>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

constexpr std::int64_t kMaxNodes = 50'000'000;

int to_count(const Rational& r, const char* what) {
  if (r.den() != 1) {
    throw Error(ErrorCode::NonCommensurate, std::string(what) + " is not a multiple of the step");
  }
  if (r.num() > kMaxNodes) {
    throw Error(ErrorCode::ProblemTooLarge, std::string(what) + " needs too many grid nodes");
  }
  return static_cast<int>(r.num());
}

}  // namespace

DelayGrid DelayGrid::build(const Rational& horizon, const Rational& tau1, const Rational& tau2,
                           const Rational& h_target) {
  const Rational zero(0);
  if (horizon <= zero) throw Error(ErrorCode::NonPositive, "horizon must be > 0", "horizon", "must be > 0");
  if (tau1 <= zero) throw Error(ErrorCode::NonPositive, "tau1 must be > 0", "tau1", "must be > 0");
  if (tau2 <= zero) throw Error(ErrorCode::NonPositive, "tau2 must be > 0", "tau2", "must be > 0");
  if (h_target <= zero) throw Error(ErrorCode::NonPositive, "h_target must be > 0", "h_target", "must be > 0");
  if (tau2 >= tau1) throw Error(ErrorCode::OrderViolation, "tau2 must be < tau1", "tau2", "must be < tau1");
  if (tau1 >= horizon) throw Error(ErrorCode::OrderViolation, "tau1 must be < horizon", "tau1", "must be < horizon");

  const Rational g = gcd(gcd(horizon, tau1), tau2);
  const std::int64_t subdivisions = (g / h_target).ceil();

  DelayGrid grid;
  grid.horizon_ = horizon;
  grid.tau1_ = tau1;
  grid.tau2_ = tau2;
  grid.step_ = g / Rational(subdivisions < 1 ? 1 : subdivisions);
  grid.h_ = grid.step_.to_double();
  grid.k1_ = to_count(tau1 / grid.step_, "tau1");
  grid.k2_ = to_count(tau2 / grid.step_, "tau2");
  grid.n_history_ = grid.k1_;
  grid.n_main_ = to_count(horizon / grid.step_, "horizon") + 1;
  if (static_cast<std::int64_t>(grid.n_history_) + grid.n_main_ > kMaxNodes) {
    throw Error(ErrorCode::ProblemTooLarge, "grid has too many nodes");
  }
  return grid;
}

DelayGrid DelayGrid::build(double horizon, double tau1, double tau2, double h_target) {
  for (double v : {horizon, tau1, tau2, h_target}) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositive, "grid inputs must be > 0");
  }
  return build(Rational::from_double(horizon), Rational::from_double(tau1),
               Rational::from_double(tau2), Rational::from_double(h_target));
}

int DelayGrid::global_index(int main_index) const {
  if (main_index < 0 || main_index >= n_main_) {
    throw Error(ErrorCode::IndexOutOfRange, "main index " + std::to_string(main_index) + " outside [0, " +
                                                std::to_string(n_main_) + ")");
  }
  return n_history_ + main_index;
}

Rational DelayGrid::exact_time(int global) const {
  if (global < 0 || global >= n_nodes()) {
    throw Error(ErrorCode::IndexOutOfRange, "node index " + std::to_string(global) + " off grid");
  }
  return Rational(global - n_history_) * step_;
}

double DelayGrid::time(int global) const { return exact_time(global).to_double(); }

std::vector<double> DelayGrid::nodes() const {
  std::vector<double> out(static_cast<std::size_t>(n_nodes()));
  for (int g = 0; g < n_nodes(); ++g) out[static_cast<std::size_t>(g)] = time(g);
  return out;
}

int DelayGrid::shifted_index(int main_index, Delay which) const {
  const int g = global_index(main_index);
  return g - (which == Delay::state ? k1_ : k2_);
}

}  // namespace tdelay
