#include "tdelay/rational.hpp"

#include <cctype>
#include <charconv>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

using i128 = __int128;

std::int64_t narrow(i128 v) {
  if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min()) {
    throw Error(ErrorCode::InvalidArgument, "rational arithmetic overflow");
  }
  return static_cast<std::int64_t>(v);
}

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational make(i128 num, i128 den) {
  if (den == 0) throw Error(ErrorCode::InvalidArgument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational(narrow(num), narrow(den));
}

constexpr std::int64_t kMaxDenominator = 1'000'000'000;
constexpr std::int64_t kMaxFractionDenominator = 1'000'000;
constexpr int kMaxDecimalDigits = 12;

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorCode::InvalidArgument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  num_ = num;
  den_ = den;
}

Rational Rational::parse(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw Error(ErrorCode::ParseError, "cannot parse rational from '" + std::string(text) + "'");
  };
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return fail();

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational p = parse(text.substr(0, slash));
    Rational q = parse(text.substr(slash + 1));
    if (q.num() == 0) return fail();
    return p / q;
  }

  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  i128 mantissa = 0;
  int frac_digits = 0;
  bool any_digit = false;
  bool in_fraction = false;
  for (; pos < text.size(); ++pos) {
    char ch = text[pos];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      mantissa = mantissa * 10 + (ch - '0');
      if (mantissa > (i128(1) << 100)) return fail();
      if (in_fraction) ++frac_digits;
      any_digit = true;
    } else if (ch == '.' && !in_fraction) {
      in_fraction = true;
    } else {
      break;
    }
  }
  if (!any_digit) return fail();
  int exponent = 0;
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') return fail();
    ++pos;
    bool exp_negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
      exp_negative = text[pos] == '-';
      ++pos;
    }
    if (pos >= text.size()) return fail();
    for (; pos < text.size(); ++pos) {
      char ch = text[pos];
      if (!std::isdigit(static_cast<unsigned char>(ch))) return fail();
      exponent = exponent * 10 + (ch - '0');
      if (exponent > 30) return fail();
    }
    if (exp_negative) exponent = -exponent;
  }
  int scale = exponent - frac_digits;
  i128 num = negative ? -mantissa : mantissa;
  i128 den = 1;
  for (int k = 0; k < std::abs(scale); ++k) {
    if (scale > 0) {
      num *= 10;
    } else {
      den *= 10;
    }
    if (num > (i128(1) << 120) || num < -(i128(1) << 120) || den > (i128(1) << 120)) return fail();
  }
  return make(num, den);
}

Rational Rational::from_double(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonCommensurate, "non-finite value cannot be made rational");
  }
  if (std::abs(value) > 1e15) {
    throw Error(ErrorCode::InvalidArgument, "value too large for exact rational grid arithmetic");
  }
  // Short fractions such as 1/3: continued-fraction convergents with a small
  // denominator that reproduce the double to within a few ulps.
  const double tol = 4.0 * DBL_EPSILON * std::max(1.0, std::abs(value));
  double x = value;
  i128 p_prev = 1, p = static_cast<i128>(std::floor(x));
  i128 q_prev = 0, q = 1;
  double frac = x - std::floor(x);
  for (int iter = 0; iter < 64; ++iter) {
    double approx = static_cast<double>(p) / static_cast<double>(q);
    if (std::abs(approx - value) <= tol) return make(p, q);
    if (frac <= 0.0) break;
    x = 1.0 / frac;
    double a = std::floor(x);
    frac = x - a;
    i128 ai = static_cast<i128>(a);
    i128 p_next = ai * p + p_prev;
    i128 q_next = ai * q + q_prev;
    if (q_next > kMaxFractionDenominator) break;
    p_prev = p;
    q_prev = q;
    p = p_next;
    q = q_next;
  }
  // Decimal literals such as 0.123456789: the shortest round-trip decimal has
  // few significant digits. Irrationals need all 17.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  const std::string_view mantissa = text.substr(0, text.find_first_of("eE"));
  int digits = 0;
  bool leading = true;
  for (char ch : mantissa) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) continue;
    if (leading && ch == '0') continue;
    leading = false;
    ++digits;
  }
  if (digits <= kMaxDecimalDigits) {
    const Rational r = parse(text);
    if (r.den() <= kMaxDenominator) return r;
  }
  throw Error(ErrorCode::NonCommensurate, "value " + std::string(text) + " is not a short fraction or decimal");
}

std::int64_t Rational::ceil() const {
  std::int64_t q = num_ / den_;
  if (num_ % den_ != 0 && num_ > 0) ++q;
  return q;
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return make(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return make(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw Error(ErrorCode::InvalidArgument, "division by zero rational");
  return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  i128 lhs = i128(a.num_) * b.den_;
  i128 rhs = i128(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational gcd(const Rational& a, const Rational& b) {
  // gcd(p/q, r/s) = gcd(p*s, r*q) / (q*s)
  i128 g = gcd128(i128(a.num()) * b.den(), i128(b.num()) * a.den());
  return make(g, i128(a.den()) * b.den());
}

}  // namespace tdelay
