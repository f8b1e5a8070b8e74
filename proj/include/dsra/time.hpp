// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dsra {

/// Civil-date helpers (proleptic Gregorian). Days are counted from the Unix
/// epoch 1970-01-01.
namespace civil {

constexpr bool is_leap(int y) {
  return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

constexpr int days_in_month(int y, int m) {
  constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

// Howard Hinnant's days_from_civil / civil_from_days.
constexpr std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Date {
  int year;
  int month;
  int day;
};

constexpr Date civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m),
          static_cast<int>(d)};
}

}  // namespace civil

/// A UTC instant with second precision. Wire form is ISO-8601
/// `YYYY-MM-DDTHH:MM:SSZ`.
struct UtcTime {
  std::int64_t secs = 0;  // seconds since Unix epoch

  auto operator<=>(const UtcTime&) const = default;

  UtcTime plus_seconds(std::int64_t s) const { return {secs + s}; }
  UtcTime plus_days(std::int64_t d) const { return {secs + d * 86400}; }

  civil::Date date() const {
    std::int64_t days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
    return civil::civil_from_days(days);
  }

  std::string iso() const {
    std::int64_t days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
    std::int64_t rem = secs - days * 86400;
    auto d = civil::civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", d.year,
                  d.month, d.day, static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
  }

  static UtcTime from_iso(std::string_view s) {
    int y, mo, d, h, mi, se;
    char z;
    if (s.size() != 20 ||
        std::sscanf(std::string(s).c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y,
                    &mo, &d, &h, &mi, &se, &z) != 7 ||
        z != 'Z')
      throw std::invalid_argument("UtcTime: bad ISO-8601 instant '" +
                                  std::string(s) + "'");
    if (mo < 1 || mo > 12 || d < 1 || d > civil::days_in_month(y, mo) ||
        h > 23 || mi > 59 || se > 59 || h < 0 || mi < 0 || se < 0)
      throw std::invalid_argument("UtcTime: out-of-range field in '" +
                                  std::string(s) + "'");
    return {civil::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 +
            se};
  }
};

/// Injected time source. Actors never read the system clock directly; the
/// harness pins a FixedClock so transcripts are reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual UtcTime now() const = 0;
};

class SystemClock final : public Clock {
 public:
  UtcTime now() const override {
    return {std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()};
  }
};

class FixedClock final : public Clock {
 public:
  explicit FixedClock(UtcTime t) : t_(t) {}
  explicit FixedClock(std::string_view iso) : t_(UtcTime::from_iso(iso)) {}

  UtcTime now() const override { return t_; }
  void set(UtcTime t) { t_ = t; }
  void advance_days(std::int64_t d) { t_ = t_.plus_days(d); }
  void advance_seconds(std::int64_t s) { t_ = t_.plus_seconds(s); }

 private:
  UtcTime t_;
};

}  // namespace dsra
