// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "dsra/bytes.hpp"
#include "dsra/rational.hpp"
#include "dsra/time.hpp"

namespace dsra {

using Json = nlohmann::json;

/// Canonical serialization: UTF-8, lexicographically sorted keys, no
/// insignificant whitespace. nlohmann::json already stores object members in
/// a sorted std::map, so a compact dump is canonical as long as the document
/// holds no floating-point numbers -- the wire format therefore never uses
/// them (rationals travel as ints or "num/den" strings).
inline std::string canonical_dump(const Json& j) { return j.dump(); }

inline Json rational_to_json(const Rational& r) {
  if (r.is_integer()) return Json(r.num());
  return Json(r.str());
}

inline Rational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_number_float()) return Rational::from_double(j.get<double>());
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  throw std::invalid_argument("rational: expected number or \"num/den\"");
}

inline Json time_to_json(const UtcTime& t) { return Json(t.iso()); }

inline UtcTime time_from_json(const Json& j) {
  return UtcTime::from_iso(j.get<std::string>());
}

template <std::size_t N>
Json fixed_to_json(const FixedBytes<N>& b) {
  return Json(b64url(b));
}

template <std::size_t N>
FixedBytes<N> fixed_from_json(const Json& j) {
  return b64url_to<N>(j.get<std::string>());
}

/// Fetch a required member, with a useful error when it is missing.
inline const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace dsra
