// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// Brute-force reference matcher. This file intentionally reimplements the
// scoring rules from scratch -- straight-line loops, its own range parsing,
// its own cap arithmetic -- and must not call into the matching engine it
// checks. Keep it dumb; its value is that it is obviously correct at desk
// scale, not that it is fast.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/datastore.hpp"
#include "dsra/errors.hpp"
#include "dsra/policy.hpp"

namespace dsra {

namespace oracle_detail {

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

inline int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

/// Own age computation: whole years elapsed at the reference date.
inline bool age_in_stored_range(std::string_view birth,
                                std::string_view range, civil::Date ref) {
  // birth is canonical YYYY-MM-DD
  if (birth.size() != 10 || birth[4] != '-' || birth[7] != '-') return false;
  if (!all_digits(birth.substr(0, 4)) || !all_digits(birth.substr(5, 2)) ||
      !all_digits(birth.substr(8, 2)))
    return false;
  int by = to_int(birth.substr(0, 4));
  int bm = to_int(birth.substr(5, 2));
  int bd = to_int(birth.substr(8, 2));
  int age = ref.year - by;
  bool birthday_passed =
      (ref.month > bm) || (ref.month == bm && ref.day >= bd);
  if (!birthday_passed) age -= 1;

  // range is "lo-hi" with an ASCII hyphen or a UTF-8 en dash
  std::string r(range);
  std::string lo_s, hi_s;
  size_t hyphen = r.find('-');
  size_t endash = r.find("\xe2\x80\x93");
  if (hyphen != std::string::npos) {
    lo_s = r.substr(0, hyphen);
    hi_s = r.substr(hyphen + 1);
  } else if (endash != std::string::npos) {
    lo_s = r.substr(0, endash);
    hi_s = r.substr(endash + 3);
  } else {
    return false;
  }
  if (!all_digits(lo_s) || !all_digits(hi_s)) return false;
  int lo = to_int(lo_s);
  int hi = to_int(hi_s);
  if (lo > hi) return false;
  return lo <= age && age <= hi;
}

/// Own postal logic: collect every maximal digit run in the address, keep
/// the ones long enough to be a postal code, test the prefix.
inline bool postal_code_has_prefix(std::string_view address,
                                   std::string_view prefix) {
  if (!all_digits(prefix)) return false;
  std::vector<std::string> runs;
  std::string current;
  for (char c : address) {
    if (c >= '0' && c <= '9') {
      current.push_back(c);
    } else if (!current.empty()) {
      runs.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) runs.push_back(current);
  for (const auto& run : runs) {
    if (run.size() < 4) continue;
    if (run.size() < prefix.size()) continue;
    if (run.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

inline std::string stored_canonical(const DataField& f) {
  if (f.canonical) return *f.canonical;
  return canonicalize(*f.attr, f.raw).text;  // may throw; caller guards
}

}  // namespace oracle_detail

/// Exhaustively score every (record, claim) pair and apply the policy rules
/// longhand. Values are canonical cleartext. Refuses anything beyond desk
/// scale so nobody is tempted to lean on it in a flow.
inline AuthDecision oracle_match(
    const std::vector<std::pair<AttributeType, std::string>>& disclosed,
    const std::vector<const DataRecord*>& candidates,
    const MatchPolicy& policy, Sensitivity sensitivity,
    civil::Date reference_date) {
  if (candidates.size() > 10)
    throw ScaleExceeded("oracle limit: 10 records");
  std::set<AttributeId> distinct;
  for (const auto& [attr, _] : disclosed) distinct.insert(attr.id);
  for (const DataRecord* r : candidates)
    for (const auto& f : r->fields)
      if (f.attr) distinct.insert(f.attr->id);
  if (distinct.size() > 8) throw ScaleExceeded("oracle limit: 8 attributes");

  Rational threshold = policy.base_threshold;
  if (sensitivity == Sensitivity::special_category)
    threshold = threshold * policy.sensitivity_multiplier;

  std::vector<RecordHandle> matched_records;
  bool any_unique = false;
  for (const DataRecord* record : candidates) {
    std::set<AttributeId> matched;
    Rational direct_sum{0};
    Rational derived_sum{0};
    for (const auto& field : record->fields) {
      if (!field.attr) continue;
      std::string stored;
      try {
        stored = oracle_detail::stored_canonical(field);
      } catch (const UnparseableValue&) {
        continue;
      }
      for (const auto& [claim_attr, claim_value] : disclosed) {
        bool hit = false;
        if (field.attr->id == "derived.age_range") {
          hit = claim_attr.id == "pid.birth_date" &&
                oracle_detail::age_in_stored_range(claim_value, stored,
                                                   reference_date);
        } else if (field.attr->id == "derived.postal_prefix") {
          hit = claim_attr.id == "pid.address" &&
                oracle_detail::postal_code_has_prefix(claim_value, stored);
        } else {
          hit = claim_attr.id == field.attr->id && claim_value == stored;
        }
        if (!hit) continue;
        if (matched.count(field.attr->id)) continue;
        matched.insert(field.attr->id);
        Rational w{1};
        auto it = policy.weights.find(field.attr->id);
        if (it != policy.weights.end()) w = it->second;
        if (field.derived)
          derived_sum += w;
        else
          direct_sum += w;
      }
    }
    Rational derived_capped =
        derived_sum > policy.derived_cap ? policy.derived_cap : derived_sum;
    Rational score = direct_sum + derived_capped;

    bool unique = false;
    for (const auto& id : matched)
      if (policy.unique_types.count(id)) unique = true;
    bool over_threshold = !(score < threshold);
    if (policy.derived_standalone_forbidden) {
      Rational rest = score - derived_capped;
      if (!(rest > Rational{0})) over_threshold = false;
    }
    if (unique || over_threshold) {
      matched_records.push_back({record->dataset_id, record->record_id});
      if (unique) any_unique = true;
    }
  }
  std::sort(matched_records.begin(), matched_records.end());

  AuthDecision out;
  out.matched_records = matched_records;
  if (matched_records.empty()) {
    out.verdict = Verdict::decline;
    out.level = MatchLevel::none;
  } else {
    out.verdict = Verdict::accept;
    out.level = any_unique ? MatchLevel::unique : MatchLevel::threshold;
  }
  return out;
}

}  // namespace dsra
