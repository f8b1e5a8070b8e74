// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsra {

using Bytes = std::vector<std::uint8_t>;

/// Fixed-size byte value with value semantics. Comparable and hashable so it
/// can key maps and be embedded in wire structs.
template <std::size_t N>
struct FixedBytes {
  std::array<std::uint8_t, N> data{};

  static constexpr std::size_t size() { return N; }

  auto operator<=>(const FixedBytes&) const = default;

  std::span<const std::uint8_t> span() const { return {data.data(), N}; }

  static FixedBytes from_span(std::span<const std::uint8_t> s) {
    if (s.size() != N) throw std::invalid_argument("FixedBytes: wrong length");
    FixedBytes out;
    std::memcpy(out.data.data(), s.data(), N);
    return out;
  }
};

using Salt16 = FixedBytes<16>;
using Nonce16 = FixedBytes<16>;
using Digest32 = FixedBytes<32>;
using BundleId = FixedBytes<16>;

namespace detail {
inline constexpr char kB64UrlAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

inline int b64url_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '-') return 62;
  if (c == '_') return 63;
  return -1;
}
}  // namespace detail

/// Unpadded base64url, the encoding of every byte field in the wire format.
inline std::string b64url_encode(std::span<const std::uint8_t> in) {
  std::string out;
  out.reserve((in.size() * 4 + 2) / 3);
  std::size_t i = 0;
  while (i + 3 <= in.size()) {
    std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out.push_back(detail::kB64UrlAlphabet[(v >> 18) & 63]);
    out.push_back(detail::kB64UrlAlphabet[(v >> 12) & 63]);
    out.push_back(detail::kB64UrlAlphabet[(v >> 6) & 63]);
    out.push_back(detail::kB64UrlAlphabet[v & 63]);
    i += 3;
  }
  if (in.size() - i == 1) {
    std::uint32_t v = in[i] << 16;
    out.push_back(detail::kB64UrlAlphabet[(v >> 18) & 63]);
    out.push_back(detail::kB64UrlAlphabet[(v >> 12) & 63]);
  } else if (in.size() - i == 2) {
    std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
    out.push_back(detail::kB64UrlAlphabet[(v >> 18) & 63]);
    out.push_back(detail::kB64UrlAlphabet[(v >> 12) & 63]);
    out.push_back(detail::kB64UrlAlphabet[(v >> 6) & 63]);
  }
  return out;
}

inline Bytes b64url_decode(std::string_view in) {
  if (in.size() % 4 == 1) throw std::invalid_argument("base64url: bad length");
  Bytes out;
  out.reserve(in.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    int v = detail::b64url_value(c);
    if (v < 0) throw std::invalid_argument("base64url: bad character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (bits > 0 && (acc & ((1u << bits) - 1)) != 0)
    throw std::invalid_argument("base64url: nonzero padding bits");
  return out;
}

template <std::size_t N>
inline std::string b64url(const FixedBytes<N>& b) {
  return b64url_encode(b.span());
}

template <std::size_t N>
inline FixedBytes<N> b64url_to(std::string_view s) {
  Bytes raw = b64url_decode(s);
  return FixedBytes<N>::from_span(raw);
}

inline std::string hex_encode(std::span<const std::uint8_t> in) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(in.size() * 2);
  for (auto b : in) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

inline void append_bytes(Bytes& out, std::span<const std::uint8_t> in) {
  out.insert(out.end(), in.begin(), in.end());
}

inline void append_str(Bytes& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
}

/// Big-endian u32 length prefix, used to frame variable-length parts of
/// hashed byte layouts.
inline void append_u32be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace dsra
