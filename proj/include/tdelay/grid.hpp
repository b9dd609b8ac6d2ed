#pragma once

#include <vector>

#include "tdelay/rational.hpp"

namespace tdelay {

/// Which of the two lags a shift refers to: the state delay tau1 (applied to
/// x) or the derivative delay tau2 (applied to x').
enum class Delay { state, derivative };

/// Uniform mesh on [-tau1, T] on which both delays are exact multiples of the
/// step. Global node g sits at time (g - n_history) * h; node n_history is
/// t = 0 and the last node is t = T. Immutable once built.
class DelayGrid {
 public:
  /// Largest step h <= h_target dividing gcd(T, tau1, tau2), i.e.
  /// h = g / ceil(g / h_target).
  static DelayGrid build(const Rational& horizon, const Rational& tau1, const Rational& tau2,
                         const Rational& h_target);
  static DelayGrid build(double horizon, double tau1, double tau2, double h_target);

  const Rational& step() const noexcept { return step_; }
  const Rational& horizon() const noexcept { return horizon_; }
  const Rational& tau1() const noexcept { return tau1_; }
  const Rational& tau2() const noexcept { return tau2_; }
  double h() const noexcept { return h_; }

  int k1() const noexcept { return k1_; }
  int k2() const noexcept { return k2_; }
  /// Nodes in [-tau1, 0).
  int n_history() const noexcept { return n_history_; }
  /// Nodes in [0, T].
  int n_main() const noexcept { return n_main_; }
  int n_nodes() const noexcept { return n_history_ + n_main_; }
  /// Main index of the node t = T.
  int last_main() const noexcept { return n_main_ - 1; }

  int global_index(int main_index) const;
  Rational exact_time(int global) const;
  double time(int global) const;
  double main_time(int main_index) const { return time(global_index(main_index)); }
  std::vector<double> nodes() const;

  /// Global index of t_i - tau for main index i.
  int shifted_index(int main_index, Delay which) const;

  bool operator==(const DelayGrid& other) const = default;

 private:
  DelayGrid() = default;

  Rational step_, horizon_, tau1_, tau2_;
  double h_ = 0.0;
  int k1_ = 0, k2_ = 0, n_history_ = 0, n_main_ = 0;
};

}  // namespace tdelay
