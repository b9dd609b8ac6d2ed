#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace tdelay {

/// Exact rational number with 64-bit numerator/denominator, always kept in
/// lowest terms with a positive denominator. Arithmetic throws on overflow.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  /// Accepts "p/q", integers and decimals with optional exponent ("0.05", "25e-3").
  static Rational parse(std::string_view text);

  /// Recovers the exact rational a double was written as (e.g. 0.1 -> 1/10).
  /// Accepts fractions with denominator <= 1e6 and decimals of at most 12
  /// significant digits; anything else throws NonCommensurate.
  static Rational from_double(double value);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Smallest integer >= this value.
  std::int64_t ceil() const;

  std::string to_string() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a) { return Rational(-a.num_, a.den_); }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Greatest common divisor of two positive rationals: the largest g such that
/// a/g and b/g are both integers.
Rational gcd(const Rational& a, const Rational& b);

}  // namespace tdelay
