// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "dsra/bytes.hpp"
#include "dsra/crypto.hpp"
#include "dsra/errors.hpp"
#include "dsra/time.hpp"
#include "dsra/unicode_tables.hpp"

namespace dsra {

/// What canonicalization rules apply to an attribute's values.
enum class AttrKind { text, date, numeric, identifier };

inline std::string_view attr_kind_name(AttrKind k) {
  switch (k) {
    case AttrKind::text: return "text";
    case AttrKind::date: return "date";
    case AttrKind::numeric: return "numeric";
    case AttrKind::identifier: return "identifier";
  }
  return "?";
}

inline AttrKind attr_kind_parse(std::string_view s) {
  if (s == "text") return AttrKind::text;
  if (s == "date") return AttrKind::date;
  if (s == "numeric") return AttrKind::numeric;
  if (s == "identifier") return AttrKind::identifier;
  throw UnknownAttribute("bad attribute kind '" + std::string(s) + "'");
}

using AttributeId = std::string;  // dotted lowercase, e.g. "pid.given_name"

/// A typed attribute: the unit of the credential catalog and of data-set
/// field metadata. `sensitive` marks GDPR special-category data.
struct AttributeType {
  AttributeId id;
  AttrKind kind = AttrKind::text;
  bool sensitive = false;

  friend bool operator==(const AttributeType&, const AttributeType&) = default;

  static bool valid_id(std::string_view id) {
    static const std::regex re(R"([a-z][a-z0-9_]*(\.[a-z][a-z0-9_]*)+)");
    return std::regex_match(id.begin(), id.end(), re);
  }
};

/// A value in canonical form, tied to the attribute it canonicalizes for.
struct CanonicalValue {
  AttributeType attr;
  std::string text;

  friend bool operator==(const CanonicalValue&, const CanonicalValue&) =
      default;
};

// ---------------------------------------------------------------------------
// Canonicalization pipeline
// ---------------------------------------------------------------------------

namespace canon_detail {

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto bad = [&] { throw UnparseableValue("invalid UTF-8"); };
  while (i < s.size()) {
    auto b0 = static_cast<std::uint8_t>(s[i]);
    char32_t cp = 0;
    int extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      bad();
    }
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) bad();
      auto bk = static_cast<std::uint8_t>(s[i + k]);
      if ((bk & 0xC0) != 0x80) bad();
      cp = (cp << 6) | (bk & 0x3F);
    }
    // Reject overlong forms and surrogates.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      bad();
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

inline const unicode::ComposeEntry* find_composition(char32_t base,
                                                     char32_t mark) {
  auto cmp = [](const unicode::ComposeEntry& e,
                std::pair<char32_t, char32_t> key) {
    return e.base != key.first ? e.base < key.first : e.mark < key.second;
  };
  auto* begin = std::begin(unicode::kComposeTable);
  auto* end = std::end(unicode::kComposeTable);
  auto* it = std::lower_bound(begin, end, std::make_pair(base, mark), cmp);
  if (it != end && it->base == base && it->mark == mark) return it;
  return nullptr;
}

/// Canonical composition: greedily combines (starter, combining-mark) pairs
/// into their precomposed form so that "u + COMBINING DIAERESIS" and the
/// precomposed u-umlaut canonicalize identically.
inline void compose(std::vector<char32_t>& cps) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < cps.size(); ++r) {
    if (w > 0) {
      if (const auto* e = find_composition(cps[w - 1], cps[r])) {
        cps[w - 1] = e->composed;
        continue;
      }
    }
    cps[w++] = cps[r];
  }
  cps.resize(w);
}

inline bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

/// Trim plus collapse of internal whitespace runs to a single U+0020.
inline void normalize_whitespace(std::vector<char32_t>& cps) {
  std::vector<char32_t> out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(0x20);
      pending_space = false;
    }
    out.push_back(cp);
  }
  cps = std::move(out);
}

inline void case_fold(std::vector<char32_t>& cps) {
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(cp >= 'A' && cp <= 'Z' ? cp + 0x20 : cp);
      continue;
    }
    auto cmp = [](const unicode::FoldEntry& e, char32_t key) {
      return e.from < key;
    };
    auto* begin = std::begin(unicode::kFoldTable);
    auto* end = std::end(unicode::kFoldTable);
    auto* it = std::lower_bound(begin, end, cp, cmp);
    if (it != end && it->from == cp) {
      for (char32_t t : it->to)
        if (t != 0) out.push_back(t);
    } else {
      out.push_back(cp);
    }
  }
  cps = std::move(out);
}

inline std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) utf8_append(out, cp);
  return out;
}

// --- date parsing ----------------------------------------------------------

inline std::optional<int> month_from_name(std::string_view name) {
  static constexpr std::string_view full[] = {
      "january", "february", "march",     "april",   "may",      "june",
      "july",    "august",   "september", "october", "november", "december"};
  std::string lower;
  lower.reserve(name.size());
  for (char c : name)
    lower.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 0x20) : c);
  for (int m = 0; m < 12; ++m) {
    if (lower == full[m] || lower == full[m].substr(0, 3)) return m + 1;
  }
  return std::nullopt;
}

/// Accepted date formats, fixed for the whole project:
///   YYYY-MM-DD | DD.MM.YYYY | DD/MM/YYYY | MonthName D[,] YYYY
/// Ambiguous numeric forms are day-first. Anything else is rejected, never
/// guessed.
inline std::string canonicalize_date(const std::string& s) {
  static const std::regex iso(R"((\d{4})-(\d{1,2})-(\d{1,2}))");
  static const std::regex dotted(R"((\d{1,2})\.(\d{1,2})\.(\d{4}))");
  static const std::regex slashed(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
  static const std::regex named(R"(([A-Za-z]+) (\d{1,2}),? (\d{4}))");

  int y = 0, m = 0, d = 0;
  std::smatch match;
  if (std::regex_match(s, match, iso)) {
    y = std::stoi(match[1]);
    m = std::stoi(match[2]);
    d = std::stoi(match[3]);
  } else if (std::regex_match(s, match, dotted) ||
             std::regex_match(s, match, slashed)) {
    d = std::stoi(match[1]);
    m = std::stoi(match[2]);
    y = std::stoi(match[3]);
  } else if (std::regex_match(s, match, named)) {
    auto mo = month_from_name(match[1].str());
    if (!mo) throw UnparseableValue("unknown month name in '" + s + "'");
    m = *mo;
    d = std::stoi(match[2]);
    y = std::stoi(match[3]);
  } else {
    throw UnparseableValue("date '" + s + "' matches no accepted format");
  }
  if (m < 1 || m > 12 || d < 1 || d > civil::days_in_month(y, m))
    throw UnparseableValue("no such calendar date: '" + s + "'");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

// --- numeric parsing -------------------------------------------------------

/// Signed decimal with optional ',' or ' ' digit grouping. '.' is always the
/// decimal separator. Canonical form drops grouping, '+', leading zeros and
/// trailing fraction zeros; "-0" collapses to "0".
inline std::string canonicalize_numeric(const std::string& s) {
  std::string digits, frac;
  bool negative = false, seen_dot = false, seen_digit = false;
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    negative = s[i] == '-';
    ++i;
  }
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      (seen_dot ? frac : digits).push_back(c);
      seen_digit = true;
    } else if (c == ',' || c == ' ') {
      if (!seen_digit || seen_dot)
        throw UnparseableValue("misplaced grouping separator in '" + s + "'");
    } else if (c == '.') {
      if (seen_dot || !seen_digit)
        throw UnparseableValue("misplaced decimal point in '" + s + "'");
      seen_dot = true;
    } else {
      throw UnparseableValue("non-numeric character in '" + s + "'");
    }
  }
  if (!seen_digit) throw UnparseableValue("no digits in '" + s + "'");
  std::size_t nz = digits.find_first_not_of('0');
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  if (digits == "0" && frac.empty()) negative = false;
  std::string out;
  if (negative) out.push_back('-');
  out += digits;
  if (!frac.empty()) {
    out.push_back('.');
    out += frac;
  }
  return out;
}

}  // namespace canon_detail

/// Deterministic canonicalization. Applies, in order: Unicode canonical
/// composition, trim, whitespace-run collapse, then the kind-specific rule
/// (full case fold for text/identifier, date or numeric normalization).
/// Rejects what it cannot parse -- the caller must treat that as "no value",
/// never guess.
inline CanonicalValue canonicalize(const AttributeType& attr,
                                   std::string_view raw) {
  auto cps = canon_detail::utf8_decode(raw);
  canon_detail::compose(cps);
  canon_detail::normalize_whitespace(cps);
  switch (attr.kind) {
    case AttrKind::text:
    case AttrKind::identifier:
      canon_detail::case_fold(cps);
      return {attr, canon_detail::encode(cps)};
    case AttrKind::date:
      return {attr, canon_detail::canonicalize_date(canon_detail::encode(cps))};
    case AttrKind::numeric:
      return {attr,
              canon_detail::canonicalize_numeric(canon_detail::encode(cps))};
  }
  throw UnparseableValue("unknown attribute kind");
}

// ---------------------------------------------------------------------------
// Commitments and match tags
// ---------------------------------------------------------------------------

/// Salted commitment binding a canonical value into an issuer signature.
/// Byte layout (see the wire-format doc):
///   SHA-256("dsra.commit.v1" || 0x00 || salt || len(id) || id
///                             || len(text) || text)
struct Commitment {
  Digest32 digest;
  Salt16 salt;

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

inline Digest32 commitment_digest(const AttributeType& attr,
                                  const CanonicalValue& value,
                                  const Salt16& salt) {
  Bytes msg;
  append_str(msg, "dsra.commit.v1");
  msg.push_back(0x00);
  append_bytes(msg, salt.span());
  append_u32be(msg, static_cast<std::uint32_t>(attr.id.size()));
  append_str(msg, attr.id);
  append_u32be(msg, static_cast<std::uint32_t>(value.text.size()));
  append_str(msg, value.text);
  return sha256(msg);
}

inline Commitment commit(const AttributeType& attr, const CanonicalValue& value,
                         const Salt16& salt) {
  return {commitment_digest(attr, value, salt), salt};
}

/// Request-scoped hash that lets a controller match a value without seeing
/// it. Different nonces give unlinkable tags for the same value.
///   SHA-256("dsra.tag.v1" || 0x00 || nonce || len(id) || id
///                          || len(text) || text)
struct MatchTag {
  Digest32 tag;

  friend bool operator==(const MatchTag&, const MatchTag&) = default;
};

inline MatchTag match_tag(const Nonce16& nonce, const AttributeType& attr,
                          const CanonicalValue& value) {
  Bytes msg;
  append_str(msg, "dsra.tag.v1");
  msg.push_back(0x00);
  append_bytes(msg, nonce.span());
  append_u32be(msg, static_cast<std::uint32_t>(attr.id.size()));
  append_str(msg, attr.id);
  append_u32be(msg, static_cast<std::uint32_t>(value.text.size()));
  append_str(msg, value.text);
  return {sha256(msg)};
}

// ---------------------------------------------------------------------------
// Attribute registry
// ---------------------------------------------------------------------------

inline const AttributeId kGivenName = "pid.given_name";
inline const AttributeId kFamilyName = "pid.family_name";
inline const AttributeId kBirthDate = "pid.birth_date";
inline const AttributeId kUniqueId = "pid.unique_id";
inline const AttributeId kAddress = "pid.address";

inline const std::vector<AttributeId>& mandatory_pid_attributes() {
  static const std::vector<AttributeId> v{kGivenName, kFamilyName, kBirthDate,
                                          kUniqueId};
  return v;
}

/// Known attribute types, keyed by id. Ships with the PID catalog (the four
/// mandatory attributes plus the common optional ones), a couple of attested
/// extension attributes, and the controller-side derived attribute ids.
class AttributeRegistry {
 public:
  static AttributeRegistry with_defaults() {
    AttributeRegistry reg;
    reg.add({kGivenName, AttrKind::text, false});
    reg.add({kFamilyName, AttrKind::text, false});
    reg.add({kBirthDate, AttrKind::date, false});
    reg.add({kUniqueId, AttrKind::identifier, false});
    reg.add({"pid.address", AttrKind::text, false});
    reg.add({"pid.email", AttrKind::identifier, false});
    reg.add({"pid.phone", AttrKind::identifier, false});
    reg.add({"eaa.email", AttrKind::identifier, false});
    reg.add({"eaa.health_insurance_id", AttrKind::identifier, true});
    reg.add({"derived.age_range", AttrKind::text, false});
    reg.add({"derived.postal_prefix", AttrKind::identifier, false});
    return reg;
  }

  void add(const AttributeType& attr) {
    if (!AttributeType::valid_id(attr.id))
      throw UnknownAttribute("malformed attribute id '" + attr.id + "'");
    attrs_[attr.id] = attr;
  }

  bool contains(const AttributeId& id) const { return attrs_.count(id) > 0; }

  const AttributeType& get(const AttributeId& id) const {
    auto it = attrs_.find(id);
    if (it == attrs_.end())
      throw UnknownAttribute("attribute '" + id + "' is not registered");
    return it->second;
  }

  std::vector<AttributeId> ids() const {
    std::vector<AttributeId> out;
    out.reserve(attrs_.size());
    for (const auto& [id, _] : attrs_) out.push_back(id);
    return out;
  }

 private:
  std::map<AttributeId, AttributeType> attrs_;
};

}  // namespace dsra
