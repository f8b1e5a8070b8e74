// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsra/bytes.hpp"

namespace dsra {

/// Randomness source for salts, nonces and identifiers. The bounded helpers
/// are implemented here rather than with std distributions so that a seeded
/// run produces the same stream on every standard library.
class Rng {
 public:
  virtual ~Rng() = default;
  virtual std::uint64_t next_u64() = 0;

  void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t v = next_u64();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i)
        out[i] = static_cast<std::uint8_t>(v >> (b * 8));
    }
  }

  template <std::size_t N>
  FixedBytes<N> bytes() {
    FixedBytes<N> out;
    fill({out.data.data(), N});
    return out;
  }

  /// Unbiased value in [0, bound). bound must be nonzero.
  std::uint64_t bounded(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v >= threshold) return v % bound;
    }
  }

  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(
                    bounded(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool chance(double p) {
    if (p <= 0) return false;
    if (p >= 1) return true;
    // 53-bit uniform in [0,1).
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u < p;
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[bounded(v.size())];
  }

  /// RFC 4122 v4-shaped UUID string drawn from this stream.
  std::string uuid() {
    auto b = bytes<16>();
    b.data[6] = static_cast<std::uint8_t>((b.data[6] & 0x0F) | 0x40);
    b.data[8] = static_cast<std::uint8_t>((b.data[8] & 0x3F) | 0x80);
    std::string hex = hex_encode(b.span());
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) +
           "-" + hex.substr(16, 4) + "-" + hex.substr(20, 12);
  }
};

class SeededRng final : public Rng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() override { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

class SystemRng final : public Rng {
 public:
  SystemRng() : engine_(std::random_device{}()) {}
  std::uint64_t next_u64() override { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dsra
