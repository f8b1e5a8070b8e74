// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dsra {

/// Exact rational arithmetic for policy weights, scores and thresholds.
/// Threshold comparisons must be exact: 1/2 + 1/2 + 2 equals 3, always, on
/// every platform, which double arithmetic cannot promise for every policy
/// an operator might write.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num) : num_(num), den_(1) {}  // NOLINT(implicit)
  Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    normalize();
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_integer() const { return den_ == 1; }
  bool is_negative() const { return num_ < 0; }
  bool is_zero() const { return num_ == 0; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from_i128(wide(a.num_) * b.den_ + wide(b.num_) * a.den_,
                     wide(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return from_i128(wide(a.num_) * b.den_ - wide(b.num_) * a.den_,
                     wide(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_i128(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a,
                                          const Rational& b) {
    return wide(a.num_) * b.den_ <=> wide(b.num_) * a.den_;
  }

  /// "7", "-3/2". The round-trip text form used in canonical JSON when the
  /// value is not an integer.
  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  static Rational parse(std::string_view s) {
    auto slash = s.find('/');
    try {
      if (slash == std::string_view::npos)
        return Rational(std::stoll(std::string(s)));
      return Rational(std::stoll(std::string(s.substr(0, slash))),
                      std::stoll(std::string(s.substr(slash + 1))));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("Rational: cannot parse '" +
                                  std::string(s) + "'");
    }
  }

  /// Exact conversion from a finite double: every finite double is a dyadic
  /// rational. Rejects values whose exact form does not fit in int64.
  static Rational from_double(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("Rational: not finite");
    int exp = 0;
    double mant = std::frexp(v, &exp);  // v = mant * 2^exp, |mant| in [0.5,1)
    // 53 mantissa bits make the scaled value integral.
    auto num = static_cast<std::int64_t>(std::ldexp(mant, 53));
    exp -= 53;
    __int128 n = num;
    __int128 d = 1;
    if (exp > 0) {
      if (exp > 62) throw std::invalid_argument("Rational: double too large");
      n <<= exp;
    } else if (exp < 0) {
      if (exp < -62) {
        // Strip factors of two shared with the numerator first.
        while (exp < 0 && n % 2 == 0) {
          n /= 2;
          ++exp;
        }
        if (exp < -62)
          throw std::invalid_argument("Rational: double too small");
      }
      d <<= -exp;
    }
    return from_i128(n, d);
  }

  double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

 private:
  static __int128 wide(std::int64_t v) { return static_cast<__int128>(v); }

  static Rational from_i128(__int128 n, __int128 d) {
    if (d == 0) throw std::invalid_argument("Rational: zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    constexpr __int128 lo = INT64_MIN, hi = INT64_MAX;
    if (n < lo || n > hi || d > hi)
      throw std::overflow_error("Rational: overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }

  void normalize() { *this = from_i128(num_, den_); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace dsra
