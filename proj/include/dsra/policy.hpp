// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/credentials.hpp"
#include "dsra/datastore.hpp"
#include "dsra/errors.hpp"
#include "dsra/jsoncanon.hpp"
#include "dsra/rational.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

/// Knobs of the threshold engine. Defaults are deliberately modest: equal
/// weights, threshold 3, half-point cap on derived evidence. Threshold
/// calibration is an open problem; these are working values, not doctrine.
struct MatchPolicy {
  std::map<AttributeId, Rational> weights;  // unlisted attrs weigh 1
  std::set<AttributeId> unique_types{kUniqueId};
  Rational base_threshold{3};
  Rational sensitivity_multiplier{3, 2};
  Rational derived_cap{1, 2};
  bool derived_standalone_forbidden = true;

  Rational weight(const AttributeId& id) const {
    auto it = weights.find(id);
    return it == weights.end() ? Rational{1} : it->second;
  }

  void validate() const {
    for (const auto& [id, w] : weights) {
      if (!AttributeType::valid_id(id))
        throw ConfigError("bad attribute id '" + id + "' in weights");
      if (w < Rational{0})
        throw ConfigError("negative weight for '" + id + "'");
    }
    for (const auto& id : unique_types)
      if (!AttributeType::valid_id(id))
        throw ConfigError("bad attribute id '" + id + "' in unique_types");
    if (base_threshold < Rational{0})
      throw ConfigError("base_threshold must be non-negative");
    if (sensitivity_multiplier < Rational{1})
      throw ConfigError("sensitivity_multiplier must be >= 1");
    if (derived_cap < Rational{0})
      throw ConfigError("derived_cap must be non-negative");
    if (derived_standalone_forbidden && !(derived_cap < base_threshold))
      throw ConfigError(
          "derived_cap must stay below base_threshold while "
          "derived_standalone_forbidden is set");
  }

  static MatchPolicy defaults() { return MatchPolicy{}; }
};

inline Json policy_to_json(const MatchPolicy& p) {
  Json weights = Json::object();
  for (const auto& [id, w] : p.weights) weights[id] = rational_to_json(w);
  Json unique = Json::array();
  for (const auto& id : p.unique_types) unique.push_back(id);
  return Json{{"weights", weights},
              {"unique_types", unique},
              {"base_threshold", rational_to_json(p.base_threshold)},
              {"sensitivity_multiplier",
               rational_to_json(p.sensitivity_multiplier)},
              {"derived_cap", rational_to_json(p.derived_cap)},
              {"derived_standalone_forbidden",
               p.derived_standalone_forbidden}};
}

inline MatchPolicy policy_from_json(const Json& j) {
  static const std::set<std::string> known{
      "weights",     "unique_types",
      "base_threshold", "sensitivity_multiplier",
      "derived_cap", "derived_standalone_forbidden"};
  if (!j.is_object()) throw ConfigError("policy must be a json object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown policy field '" + key + "'");
  MatchPolicy p;
  if (j.contains("weights")) {
    p.weights.clear();
    for (const auto& [id, w] : j["weights"].items())
      p.weights[id] = rational_from_json(w);
  }
  if (j.contains("unique_types")) {
    p.unique_types.clear();
    for (const auto& id : j["unique_types"])
      p.unique_types.insert(id.get<std::string>());
  }
  if (j.contains("base_threshold"))
    p.base_threshold = rational_from_json(j["base_threshold"]);
  if (j.contains("sensitivity_multiplier"))
    p.sensitivity_multiplier = rational_from_json(j["sensitivity_multiplier"]);
  if (j.contains("derived_cap"))
    p.derived_cap = rational_from_json(j["derived_cap"]);
  if (j.contains("derived_standalone_forbidden"))
    p.derived_standalone_forbidden =
        j["derived_standalone_forbidden"].get<bool>();
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Claims as seen by the matcher
// ---------------------------------------------------------------------------

/// One claim the requester put on the table: a canonical value in cleartext
/// mode, a request-scoped match tag in hashed mode.
struct Claim {
  AttributeType attr;
  std::optional<std::string> value;  // canonical text (cleartext mode)
  std::optional<MatchTag> tag;       // hashed mode
};

/// Mode-tagged view over what was disclosed, fed to the matcher. Built from
/// a verified presentation in the SSI flow or from the registered bundle in
/// the FIM flow.
struct DisclosedClaims {
  DisclosureMode mode = DisclosureMode::cleartext;
  Nonce16 nonce;
  std::vector<Claim> claims;

  const Claim* find(const AttributeId& id) const {
    for (const auto& c : claims)
      if (c.attr.id == id) return &c;
    return nullptr;
  }

  static DisclosedClaims from_presentation(const Presentation& p) {
    DisclosedClaims out;
    out.mode = p.mode;
    out.nonce = p.nonce;
    for (const auto& slot : p.slots) {
      if (!slot.disclosed) continue;
      out.claims.push_back(Claim{slot.attr, slot.value, slot.tag});
    }
    return out;
  }

  /// Build from canonical values directly, deriving tags in hashed mode.
  static DisclosedClaims from_values(
      DisclosureMode mode, const Nonce16& nonce,
      const std::vector<std::pair<AttributeType, std::string>>& values) {
    DisclosedClaims out;
    out.mode = mode;
    out.nonce = nonce;
    for (const auto& [attr, canonical] : values) {
      Claim c{attr, std::nullopt, std::nullopt};
      if (mode == DisclosureMode::cleartext) {
        c.value = canonical;
      } else {
        c.tag = match_tag(nonce, attr, CanonicalValue{attr, canonical});
      }
      out.claims.push_back(std::move(c));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Field matchers
// ---------------------------------------------------------------------------

/// Derived attributes never match on equality; each has a source attribute
/// and a containment test of the claimed source value in the stored range.
inline std::optional<AttributeId> derived_source(const AttributeId& id) {
  if (id == "derived.age_range") return kBirthDate;
  if (id == "derived.postal_prefix") return kAddress;
  return std::nullopt;
}

namespace match_detail {

inline std::optional<int> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

/// Age at the reference date implied by a canonical YYYY-MM-DD birth date.
inline std::optional<int> age_at(std::string_view birth_canonical,
                                 civil::Date ref) {
  if (birth_canonical.size() != 10) return std::nullopt;
  auto y = parse_int(birth_canonical.substr(0, 4));
  auto m = parse_int(birth_canonical.substr(5, 2));
  auto d = parse_int(birth_canonical.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  int age = ref.year - *y;
  if (ref.month < *m || (ref.month == *m && ref.day < *d)) --age;
  return age;
}

/// Stored range "30-39" (ASCII hyphen or en dash), inclusive on both ends.
inline bool age_range_contains(std::string_view stored_range, int age) {
  size_t dash = stored_range.find('-');
  size_t dash_len = 1;
  if (dash == std::string_view::npos) {
    dash = stored_range.find("–");  // en dash
    dash_len = 3;
  }
  if (dash == std::string_view::npos) return false;
  auto lo = parse_int(stored_range.substr(0, dash));
  auto hi = parse_int(stored_range.substr(dash + dash_len));
  if (!lo || !hi || *lo > *hi) return false;
  return age >= *lo && age <= *hi;
}

/// A stored postal prefix matches an address when some digit run of plausible
/// postal-code length (>= 4) in the address starts with the prefix.
inline bool postal_prefix_contains(std::string_view stored_prefix,
                                   std::string_view address_canonical) {
  if (stored_prefix.empty()) return false;
  for (char c : stored_prefix)
    if (c < '0' || c > '9') return false;
  size_t i = 0;
  while (i < address_canonical.size()) {
    if (address_canonical[i] < '0' || address_canonical[i] > '9') {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < address_canonical.size() && address_canonical[i] >= '0' &&
           address_canonical[i] <= '9')
      ++i;
    std::string_view run = address_canonical.substr(start, i - start);
    if (run.size() >= 4 && run.size() >= stored_prefix.size() &&
        run.substr(0, stored_prefix.size()) == stored_prefix)
      return true;
  }
  return false;
}

}  // namespace match_detail

/// Containment test for a derived stored field against a claimed cleartext
/// source value. Hashed claims cannot drive containment, so derived fields
/// simply contribute nothing in hashed mode.
inline bool derived_field_matches(const AttributeId& derived_attr,
                                  std::string_view stored_canonical,
                                  std::string_view claimed_source_canonical,
                                  civil::Date reference_date) {
  if (derived_attr == "derived.age_range") {
    auto age = match_detail::age_at(claimed_source_canonical, reference_date);
    return age && match_detail::age_range_contains(stored_canonical, *age);
  }
  if (derived_attr == "derived.postal_prefix") {
    return match_detail::postal_prefix_contains(stored_canonical,
                                                claimed_source_canonical);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct MatchContext {
  civil::Date reference_date;  // "today" for age computation
};

struct PerRecordScore {
  Rational score;
  std::set<AttributeId> matched_attrs;
  Rational derived_contribution;
};

struct MatchScore {
  std::map<RecordHandle, PerRecordScore> per_record;
};

/// Score one record against the disclosed claims. Cleartext claims compare
/// canonical values, hashed claims compare match tags recomputed over the
/// stored canonical value under the request nonce; either way the stored
/// plaintext never needs to leave this function. Derived fields accumulate
/// separately and are capped.
inline PerRecordScore score_match(const DisclosedClaims& disclosed,
                                  const DataRecord& record,
                                  const MatchPolicy& policy,
                                  const MatchContext& ctx) {
  PerRecordScore out;
  Rational base_sum{0};
  Rational derived_raw{0};
  for (const auto& field : record.fields) {
    if (!field.attr) continue;  // untyped labels never contribute
    const AttributeId& attr_id = field.attr->id;
    if (out.matched_attrs.count(attr_id)) continue;
    std::string stored;
    if (field.canonical) {
      stored = *field.canonical;
    } else {
      try {
        stored = canonicalize(*field.attr, field.raw).text;
      } catch (const UnparseableValue&) {
        continue;  // an uncanonicalizable stored value never matches
      }
    }
    bool matched = false;
    if (auto source = derived_source(attr_id)) {
      if (disclosed.mode == DisclosureMode::cleartext) {
        const Claim* c = disclosed.find(*source);
        if (c && c->value)
          matched = derived_field_matches(attr_id, stored, *c->value,
                                          ctx.reference_date);
      }
    } else {
      const Claim* c = disclosed.find(attr_id);
      if (c) {
        if (disclosed.mode == DisclosureMode::cleartext) {
          matched = c->value && *c->value == stored;
        } else {
          matched = c->tag &&
                    *c->tag == match_tag(disclosed.nonce, *field.attr,
                                         CanonicalValue{*field.attr, stored});
        }
      }
    }
    if (!matched) continue;
    out.matched_attrs.insert(attr_id);
    (field.derived ? derived_raw : base_sum) += policy.weight(attr_id);
  }
  out.derived_contribution = std::min(derived_raw, policy.derived_cap);
  out.score = base_sum + out.derived_contribution;
  return out;
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

enum class MatchLevel { unique, threshold, none };

inline std::string_view match_level_name(MatchLevel l) {
  switch (l) {
    case MatchLevel::unique: return "unique";
    case MatchLevel::threshold: return "threshold";
    case MatchLevel::none: return "none";
  }
  return "?";
}

struct AuthDecision {
  Verdict verdict = Verdict::decline;
  std::vector<RecordHandle> matched_records;  // sorted; empty on decline
  MatchLevel level = MatchLevel::none;

  friend bool operator==(const AuthDecision&, const AuthDecision&) = default;
};

inline Rational effective_threshold(const MatchPolicy& policy,
                                    Sensitivity sensitivity) {
  return sensitivity == Sensitivity::special_category
             ? policy.base_threshold * policy.sensitivity_multiplier
             : policy.base_threshold;
}

/// Turn per-record scores into a verdict. A matched unique type identifies a
/// record outright; otherwise the capped score must clear the effective
/// threshold, and when derived evidence may not stand alone there must be
/// something left after subtracting it. Every qualifying record is returned:
/// shared accounts legitimately match more than one.
inline AuthDecision evaluate(const MatchScore& scores,
                             const MatchPolicy& policy,
                             Sensitivity sensitivity) {
  const Rational threshold = effective_threshold(policy, sensitivity);
  AuthDecision out;
  for (const auto& [handle, s] : scores.per_record) {
    bool unique = std::any_of(
        s.matched_attrs.begin(), s.matched_attrs.end(),
        [&](const AttributeId& a) { return policy.unique_types.count(a); });
    bool threshold_met =
        s.score >= threshold &&
        (!policy.derived_standalone_forbidden ||
         s.score - s.derived_contribution > Rational{0});
    if (!unique && !threshold_met) continue;
    out.matched_records.push_back(handle);
    if (unique)
      out.level = MatchLevel::unique;
    else if (out.level != MatchLevel::unique)
      out.level = MatchLevel::threshold;
  }
  std::sort(out.matched_records.begin(), out.matched_records.end());
  out.verdict =
      out.matched_records.empty() ? Verdict::decline : Verdict::accept;
  return out;
}

inline AuthDecision match_records(const DisclosedClaims& disclosed,
                                  const std::vector<const DataRecord*>& candidates,
                                  const MatchPolicy& policy,
                                  Sensitivity sensitivity,
                                  const MatchContext& ctx) {
  MatchScore scores;
  for (const DataRecord* r : candidates) {
    scores.per_record[RecordHandle{r->dataset_id, r->record_id}] =
        score_match(disclosed, *r, policy, ctx);
  }
  return evaluate(scores, policy, sensitivity);
}

}  // namespace dsra
