// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/datastore.hpp"
#include "dsra/oracle.hpp"
#include "dsra/policy.hpp"
#include "dsra/rng.hpp"
#include "support/instance_gen.hpp"

using namespace dsra;

namespace {

const AttributeRegistry& reg() {
  static const AttributeRegistry r = AttributeRegistry::with_defaults();
  return r;
}

AttributeType attr(const std::string& id) { return reg().get(id); }

std::string canon(const std::string& id, const std::string& raw) {
  return canonicalize(attr(id), raw).text;
}

/// Record with typed fields, canonical forms cached eagerly.
DataRecord record(std::string rid,
                  std::vector<std::pair<std::string, std::string>> fields,
                  std::string dataset = "crm") {
  DataRecord r;
  r.record_id = std::move(rid);
  r.dataset_id = std::move(dataset);
  for (auto& [id, raw] : fields) {
    DataField f;
    f.attr = attr(id);
    f.label = id;
    f.raw = raw;
    f.derived = id.rfind("derived.", 0) == 0;
    try {
      f.canonical = canonicalize(*f.attr, raw).text;
    } catch (const UnparseableValue&) {
      f.canonical = std::nullopt;
    }
    r.fields.push_back(std::move(f));
  }
  return r;
}

DisclosedClaims claims(
    std::vector<std::pair<std::string, std::string>> values,
    DisclosureMode mode = DisclosureMode::cleartext) {
  Nonce16 nonce{};
  nonce.data[0] = 0x42;
  std::vector<std::pair<AttributeType, std::string>> typed;
  for (auto& [id, canonical] : values) typed.emplace_back(attr(id), canonical);
  return DisclosedClaims::from_values(mode, nonce, typed);
}

MatchContext ctx() { return MatchContext{{2026, 8, 19}}; }

std::vector<const DataRecord*> ptrs(const std::vector<DataRecord>& v) {
  std::vector<const DataRecord*> out;
  for (const auto& r : v) out.push_back(&r);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scoring basics
// ---------------------------------------------------------------------------

TEST_CASE("three matching attributes clear the default threshold",
          "[policy]") {
  auto rec = record("r1", {{"pid.given_name", "Erika"},
                           {"pid.family_name", "Mustermann"},
                           {"pid.birth_date", "12.08.1964"}});
  auto dc = claims({{"pid.given_name", "erika"},
                    {"pid.family_name", "mustermann"},
                    {"pid.birth_date", "1964-08-12"}});
  MatchPolicy policy;
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.score == Rational{3});
  CHECK(score.matched_attrs ==
        std::set<AttributeId>{kGivenName, kFamilyName, kBirthDate});
  CHECK(score.derived_contribution == Rational{0});

  auto decision =
      match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  REQUIRE(decision.verdict == Verdict::accept);
  CHECK(decision.level == MatchLevel::threshold);
  REQUIRE(decision.matched_records.size() == 1);
  CHECK(decision.matched_records[0] == RecordHandle{"crm", "r1"});
}

TEST_CASE("disjoint claims score zero and decline", "[policy]") {
  auto rec = record("r1", {{"pid.given_name", "Erika"},
                           {"pid.family_name", "Mustermann"}});
  auto dc = claims({{"pid.given_name", "max"}, {"pid.family_name", "meier"}});
  MatchPolicy policy;
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.score == Rational{0});
  CHECK(score.matched_attrs.empty());

  auto decision =
      match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::decline);
  CHECK(decision.level == MatchLevel::none);
  CHECK(decision.matched_records.empty());
}

TEST_CASE("weights change per-attribute contributions", "[policy]") {
  auto rec = record("r1", {{"pid.given_name", "Erika"},
                           {"pid.family_name", "Mustermann"}});
  auto dc = claims({{"pid.given_name", "erika"},
                    {"pid.family_name", "mustermann"}});
  MatchPolicy policy;
  policy.weights[kFamilyName] = Rational{2};
  policy.weights[kGivenName] = Rational{1, 2};
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.score == Rational{5, 2});
}

TEST_CASE("a score strictly below the threshold declines", "[policy]") {
  auto rec = record("r1", {{"pid.given_name", "Erika"},
                           {"pid.family_name", "Mustermann"},
                           {"pid.birth_date", "1964-08-12"}});
  auto dc = claims({{"pid.given_name", "erika"},
                    {"pid.family_name", "mustermann"},
                    {"pid.birth_date", "1964-08-12"}});
  MatchPolicy policy;
  policy.weights[kBirthDate] = Rational{1, 2};  // 1 + 1 + 1/2 = 5/2 < 3
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.score == Rational{5, 2});
  auto decision =
      match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::decline);

  // Exactly at the threshold is enough.
  policy.weights[kBirthDate] = Rational{1};
  decision = match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::accept);
}

TEST_CASE("duplicate typed fields count once per attribute", "[policy]") {
  DataRecord rec = record("r1", {{"pid.given_name", "Erika"},
                                 {"pid.given_name", "ERIKA "}});
  auto dc = claims({{"pid.given_name", "erika"}});
  auto score = score_match(dc, rec, MatchPolicy{}, ctx());
  CHECK(score.score == Rational{1});
}

TEST_CASE("untyped fields never contribute", "[policy]") {
  DataRecord rec;
  rec.record_id = "r1";
  rec.dataset_id = "crm";
  rec.fields.push_back(
      DataField{std::nullopt, "customer_name", "erika", std::nullopt, false});
  auto dc = claims({{"pid.given_name", "erika"}});
  auto score = score_match(dc, rec, MatchPolicy{}, ctx());
  CHECK(score.score == Rational{0});
}

TEST_CASE("unparseable stored values never match; uncached parseable ones do",
          "[policy]") {
  DataRecord rec = record("r1", {{"pid.birth_date", "Feb 30 1990"}});
  REQUIRE_FALSE(rec.fields[0].canonical.has_value());
  auto dc = claims({{"pid.birth_date", "1990-02-28"}});
  CHECK(score_match(dc, rec, MatchPolicy{}, ctx()).score == Rational{0});

  // A parseable raw value without a cached canonical form still matches.
  DataRecord uncached = record("r2", {{"pid.birth_date", "12.08.1964"}});
  uncached.fields[0].canonical = std::nullopt;
  auto dc2 = claims({{"pid.birth_date", "1964-08-12"}});
  CHECK(score_match(dc2, uncached, MatchPolicy{}, ctx()).score == Rational{1});
}

// ---------------------------------------------------------------------------
// Unique identifiers
// ---------------------------------------------------------------------------

TEST_CASE("a unique identifier match is decisive on its own", "[policy]") {
  auto rec = record("r1", {{"pid.unique_id", "DE-0001"},
                           {"pid.family_name", "Mustermann"}});
  auto dc = claims({{"pid.unique_id", "de-0001"}});
  MatchPolicy policy;  // threshold 3, score will be 1
  auto decision =
      match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  REQUIRE(decision.verdict == Verdict::accept);
  CHECK(decision.level == MatchLevel::unique);

  // With the unique set emptied the same evidence falls below the threshold.
  policy.unique_types.clear();
  decision = match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::decline);
}

TEST_CASE("unique short-circuit applies even above the raised threshold",
          "[policy]") {
  auto rec = record("r1", {{"pid.unique_id", "DE-0001"},
                           {"eaa.health_insurance_id", "K111"}});
  auto dc = claims({{"pid.unique_id", "de-0001"}});
  auto decision = match_records(dc, ptrs({rec}), MatchPolicy{},
                                Sensitivity::special_category, ctx());
  CHECK(decision.verdict == Verdict::accept);
  CHECK(decision.level == MatchLevel::unique);
}

// ---------------------------------------------------------------------------
// Shared accounts, empty stores
// ---------------------------------------------------------------------------

TEST_CASE("every qualifying record is matched", "[policy]") {
  auto a = record("alice", {{"pid.given_name", "Erika"},
                            {"pid.family_name", "Mustermann"},
                            {"pid.birth_date", "1964-08-12"}},
                  "crm");
  auto b = record("joint", {{"pid.given_name", "erika "},
                            {"pid.family_name", "MUSTERMANN"},
                            {"pid.birth_date", "12.08.1964"}},
                  "billing");
  auto c = record("other", {{"pid.given_name", "Max"}}, "crm");
  auto dc = claims({{"pid.given_name", "erika"},
                    {"pid.family_name", "mustermann"},
                    {"pid.birth_date", "1964-08-12"}});
  auto decision =
      match_records(dc, ptrs({a, b, c}), MatchPolicy{}, Sensitivity::normal,
                    ctx());
  REQUIRE(decision.verdict == Verdict::accept);
  REQUIRE(decision.matched_records.size() == 2);
  CHECK(decision.matched_records[0] == RecordHandle{"billing", "joint"});
  CHECK(decision.matched_records[1] == RecordHandle{"crm", "alice"});
  CHECK(std::is_sorted(decision.matched_records.begin(),
                       decision.matched_records.end()));
}

TEST_CASE("no candidate records declines with level none", "[policy]") {
  auto dc = claims({{"pid.given_name", "erika"}});
  auto decision =
      match_records(dc, {}, MatchPolicy{}, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::decline);
  CHECK(decision.level == MatchLevel::none);
  CHECK(decision.matched_records.empty());
}

// ---------------------------------------------------------------------------
// Sensitivity
// ---------------------------------------------------------------------------

TEST_CASE("special category data raises the effective threshold", "[policy]") {
  MatchPolicy policy;
  CHECK(effective_threshold(policy, Sensitivity::normal) == Rational{3});
  CHECK(effective_threshold(policy, Sensitivity::special_category) ==
        Rational{9, 2});

  auto rec = record("r1", {{"pid.given_name", "Erika"},
                           {"pid.family_name", "Mustermann"},
                           {"pid.birth_date", "1964-08-12"}});
  auto dc = claims({{"pid.given_name", "erika"},
                    {"pid.family_name", "mustermann"},
                    {"pid.birth_date", "1964-08-12"}});
  // Score 3 clears the normal threshold but not the raised one.
  CHECK(match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx())
            .verdict == Verdict::accept);
  CHECK(match_records(dc, ptrs({rec}), policy, Sensitivity::special_category,
                      ctx())
            .verdict == Verdict::decline);

  policy.sensitivity_multiplier = Rational{1};
  CHECK(match_records(dc, ptrs({rec}), policy, Sensitivity::special_category,
                      ctx())
            .verdict == Verdict::accept);
}

// ---------------------------------------------------------------------------
// Derived evidence
// ---------------------------------------------------------------------------

TEST_CASE("derived range evidence is capped", "[policy]") {
  auto rec = record("r1", {{"pid.family_name", "Mustermann"},
                           {"derived.age_range", "30-39"}});
  REQUIRE(rec.fields[1].derived);
  // Born 1992 -> age 34 at the reference date, inside the stored range.
  auto dc = claims({{"pid.family_name", "mustermann"},
                    {"pid.birth_date", "1992-01-15"}});
  MatchPolicy policy;
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.derived_contribution == Rational{1, 2});  // weight 1 capped
  CHECK(score.score == Rational{3, 2});
  CHECK(score.matched_attrs.count("derived.age_range") == 1);
}

TEST_CASE("derived contributions bucket together under one cap", "[policy]") {
  auto rec = record("r1", {{"derived.age_range", "30-39"},
                           {"derived.postal_prefix", "5114"},
                           {"pid.family_name", "Mustermann"}});
  auto dc = claims({{"pid.birth_date", "1992-01-15"},
                    {"pid.address", canon("pid.address",
                                          "Heidestraße 17, 51147 Köln")},
                    {"pid.family_name", "mustermann"}});
  MatchPolicy policy;  // cap 1/2
  auto score = score_match(dc, rec, policy, ctx());
  // Both derived fields match (raw 2) but the bucket is capped at 1/2.
  CHECK(score.matched_attrs.count("derived.age_range") == 1);
  CHECK(score.matched_attrs.count("derived.postal_prefix") == 1);
  CHECK(score.derived_contribution == Rational{1, 2});
  CHECK(score.score == Rational{3, 2});
}

TEST_CASE("derived evidence cannot stand alone", "[policy]") {
  // Constructed directly: validate() would reject a cap this generous.
  MatchPolicy policy;
  policy.base_threshold = Rational{3};
  policy.derived_cap = Rational{3};
  policy.weights["derived.age_range"] = Rational{2};
  policy.derived_standalone_forbidden = true;

  auto rec = record("r1", {{"derived.age_range", "30-39"},
                           {"derived.postal_prefix", "5114"}});
  auto dc = claims({{"pid.birth_date", "1992-01-15"},
                    {"pid.address", canon("pid.address",
                                          "Heidestraße 17, 51147 Köln")}});
  auto score = score_match(dc, rec, policy, ctx());
  CHECK(score.score == Rational{3});  // meets the threshold numerically
  CHECK(score.derived_contribution == Rational{3});
  auto decision =
      match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::decline);  // all of it is derived

  policy.derived_standalone_forbidden = false;
  decision = match_records(dc, ptrs({rec}), policy, Sensitivity::normal, ctx());
  CHECK(decision.verdict == Verdict::accept);
}

TEST_CASE("hashed claims cannot drive derived containment", "[policy]") {
  auto rec = record("r1", {{"pid.family_name", "Mustermann"},
                           {"derived.age_range", "30-39"}});
  std::vector<std::pair<std::string, std::string>> values = {
      {"pid.family_name", "mustermann"}, {"pid.birth_date", "1992-01-15"}};

  auto clear = score_match(claims(values, DisclosureMode::cleartext), rec,
                           MatchPolicy{}, ctx());
  auto hashed = score_match(claims(values, DisclosureMode::hashed), rec,
                            MatchPolicy{}, ctx());
  CHECK(clear.score == Rational{3, 2});
  CHECK(hashed.score == Rational{1});  // only the family name
  CHECK(hashed.derived_contribution == Rational{0});
}

TEST_CASE("hashed and cleartext agree on stores without derived fields",
          "[policy]") {
  auto a = record("r1", {{"pid.given_name", "Erika"},
                         {"pid.family_name", "Mustermann"},
                         {"pid.birth_date", "1964-08-12"}});
  auto b = record("r2", {{"pid.given_name", "Max"},
                         {"pid.family_name", "Mustermann"},
                         {"pid.unique_id", "DE-0002"}});
  std::vector<std::pair<std::string, std::string>> values = {
      {"pid.given_name", "erika"},
      {"pid.family_name", "mustermann"},
      {"pid.birth_date", "1964-08-12"}};
  auto clear = match_records(claims(values, DisclosureMode::cleartext),
                             ptrs({a, b}), MatchPolicy{}, Sensitivity::normal,
                             ctx());
  auto hashed = match_records(claims(values, DisclosureMode::hashed),
                              ptrs({a, b}), MatchPolicy{}, Sensitivity::normal,
                              ctx());
  CHECK(clear == hashed);
  CHECK(clear.verdict == Verdict::accept);
}

// ---------------------------------------------------------------------------
// Field matchers
// ---------------------------------------------------------------------------

TEST_CASE("age ranges are inclusive and flip on the birthday", "[policy]") {
  using match_detail::age_at;
  using match_detail::age_range_contains;

  CHECK(age_at("1996-08-19", {2026, 8, 19}) == 30);  // birthday today
  CHECK(age_at("1996-08-19", {2026, 8, 18}) == 29);  // tomorrow
  CHECK(age_at("1996-08-19", {2026, 8, 20}) == 30);
  CHECK_FALSE(age_at("1996-8-19", {2026, 8, 19}).has_value());

  CHECK(age_range_contains("30-39", 30));
  CHECK(age_range_contains("30-39", 39));
  CHECK_FALSE(age_range_contains("30-39", 29));
  CHECK_FALSE(age_range_contains("30-39", 40));
  CHECK(age_range_contains("30–39", 35));  // en dash
  CHECK_FALSE(age_range_contains("39-30", 35));
  CHECK_FALSE(age_range_contains("thirty-39", 35));
  CHECK_FALSE(age_range_contains("30", 30));

  CHECK(derived_field_matches("derived.age_range", "30-39", "1996-08-19",
                              {2026, 8, 19}));
  CHECK_FALSE(derived_field_matches("derived.age_range", "30-39", "1996-08-19",
                                    {2026, 8, 18}));
}

TEST_CASE("postal prefixes match digit runs of postal-code length",
          "[policy]") {
  using match_detail::postal_prefix_contains;
  std::string addr = canon("pid.address", "Heidestraße 17, 51147 Köln");
  CHECK(postal_prefix_contains("511", addr));
  CHECK(postal_prefix_contains("5114", addr));
  CHECK(postal_prefix_contains("51147", addr));
  CHECK_FALSE(postal_prefix_contains("51148", addr));
  CHECK_FALSE(postal_prefix_contains("17", addr));   // run too short
  CHECK_FALSE(postal_prefix_contains("175", addr));
  CHECK_FALSE(postal_prefix_contains("", addr));
  CHECK_FALSE(postal_prefix_contains("a1", addr));

  std::string berlin = canon("pid.address", "Musterstr. 5, 10115 Berlin");
  CHECK(postal_prefix_contains("101", berlin));
  CHECK_FALSE(postal_prefix_contains("9", berlin));
  CHECK(derived_field_matches("derived.postal_prefix", "101", berlin,
                              {2026, 8, 19}));
}

// ---------------------------------------------------------------------------
// Policy configuration
// ---------------------------------------------------------------------------

TEST_CASE("policy json round trips", "[policy]") {
  MatchPolicy p;
  p.weights[kBirthDate] = Rational{1, 2};
  p.weights["eaa.health_insurance_id"] = Rational{2};
  p.unique_types = {kUniqueId, "eaa.health_insurance_id"};
  p.base_threshold = Rational{5, 2};
  p.sensitivity_multiplier = Rational{2};
  p.derived_cap = Rational{1};
  p.derived_standalone_forbidden = true;

  auto j = policy_to_json(p);
  auto q = policy_from_json(j);
  CHECK(q.weights == p.weights);
  CHECK(q.unique_types == p.unique_types);
  CHECK(q.base_threshold == p.base_threshold);
  CHECK(q.sensitivity_multiplier == p.sensitivity_multiplier);
  CHECK(q.derived_cap == p.derived_cap);
  CHECK(q.derived_standalone_forbidden == p.derived_standalone_forbidden);

  // Defaults survive an empty object.
  auto d = policy_from_json(Json::object());
  CHECK(d.base_threshold == Rational{3});
  CHECK(d.unique_types == std::set<AttributeId>{kUniqueId});
}

TEST_CASE("policy json rejects malformed configurations", "[policy]") {
  CHECK_THROWS_AS(policy_from_json(Json::array()), ConfigError);
  CHECK_THROWS_AS(policy_from_json(Json{{"treshold", 3}}), ConfigError);
  CHECK_THROWS_AS(policy_from_json(Json{{"weights", {{"pid.given_name", -1}}}}),
                  ConfigError);
  CHECK_THROWS_AS(policy_from_json(Json{{"weights", {{"Bad Id!", 1}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      policy_from_json(Json{{"sensitivity_multiplier", "1/2"}}),
      ConfigError);
  CHECK_THROWS_AS(policy_from_json(Json{{"base_threshold", -1}}), ConfigError);
  // Cap at or above the threshold while derived evidence may not stand alone.
  CHECK_THROWS_AS(
      policy_from_json(Json{{"base_threshold", 1}, {"derived_cap", 1}}),
      ConfigError);
  CHECK_NOTHROW(policy_from_json(Json{{"base_threshold", 1},
                                      {"derived_cap", 1},
                                      {"derived_standalone_forbidden", false}}));
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

TEST_CASE("oracle agrees on hand-built cases", "[policy][oracle]") {
  auto a = record("alice", {{"pid.given_name", "Erika"},
                            {"pid.family_name", "Mustermann"},
                            {"pid.birth_date", "1964-08-12"},
                            {"derived.age_range", "60-69"}});
  auto b = record("bob", {{"pid.given_name", "Max"},
                          {"pid.unique_id", "DE-0002"}});
  MatchPolicy policy;
  std::vector<std::pair<AttributeType, std::string>> values = {
      {attr("pid.given_name"), "erika"},
      {attr("pid.family_name"), "mustermann"},
      {attr("pid.birth_date"), "1964-08-12"}};

  for (auto sensitivity :
       {Sensitivity::normal, Sensitivity::special_category}) {
    auto dc = DisclosedClaims::from_values(DisclosureMode::cleartext,
                                           Nonce16{}, values);
    auto engine = match_records(dc, ptrs({a, b}), policy, sensitivity, ctx());
    auto oracle = oracle_match(values, ptrs({a, b}), policy, sensitivity,
                               ctx().reference_date);
    CHECK(engine == oracle);
  }

  // Unique-only evidence.
  std::vector<std::pair<AttributeType, std::string>> unique_values = {
      {attr("pid.unique_id"), "de-0002"}};
  auto dc = DisclosedClaims::from_values(DisclosureMode::cleartext, Nonce16{},
                                         unique_values);
  auto engine = match_records(dc, ptrs({a, b}), policy, Sensitivity::normal,
                              ctx());
  auto oracle = oracle_match(unique_values, ptrs({a, b}), policy,
                             Sensitivity::normal, ctx().reference_date);
  CHECK(engine == oracle);
  CHECK(engine.level == MatchLevel::unique);
}

TEST_CASE("oracle refuses anything beyond desk scale", "[policy][oracle]") {
  std::vector<DataRecord> many;
  for (int i = 0; i < 11; ++i)
    many.push_back(record("r" + std::to_string(i),
                          {{"pid.given_name", "Erika"}}));
  CHECK_THROWS_AS(oracle_match({}, ptrs(many), MatchPolicy{},
                               Sensitivity::normal, {2026, 8, 19}),
                  ScaleExceeded);

  // Nine distinct attribute ids across claims and fields.
  AttributeRegistry wide = AttributeRegistry::with_defaults();
  std::vector<DataRecord> one;
  one.push_back(record("r0", {{"pid.given_name", "Erika"},
                              {"pid.family_name", "Mustermann"},
                              {"pid.birth_date", "1964-08-12"},
                              {"pid.unique_id", "DE-1"},
                              {"pid.address", "Platz 1, 10117 Berlin"},
                              {"pid.email", "e@example.org"},
                              {"pid.phone", "030111222"},
                              {"eaa.email", "w@example.org"}}));
  std::vector<std::pair<AttributeType, std::string>> nine = {
      {wide.get("eaa.health_insurance_id"), "k111"}};
  CHECK_THROWS_AS(oracle_match(nine, ptrs(one), MatchPolicy{},
                               Sensitivity::normal, {2026, 8, 19}),
                  ScaleExceeded);
}

// ---------------------------------------------------------------------------
// Randomized properties
// ---------------------------------------------------------------------------

TEST_CASE("engine and oracle agree across random instances",
          "[policy][oracle]") {
  SeededRng rng(20260819);
  int accepts = 0, declines = 0;
  for (int i = 0; i < 800; ++i) {
    auto inst = testgen::random_instance(rng);
    INFO("instance " << i);
    auto engine = match_records(inst.cleartext_claims, inst.candidates,
                                inst.policy, inst.sensitivity, inst.ctx);
    auto oracle = oracle_match(inst.disclosed_values, inst.candidates,
                               inst.policy, inst.sensitivity,
                               inst.ctx.reference_date);
    REQUIRE(engine == oracle);
    (engine.verdict == Verdict::accept ? accepts : declines) += 1;
  }
  // The generator must exercise both outcomes or the property is vacuous.
  CHECK(accepts > 50);
  CHECK(declines > 50);
}

TEST_CASE("hashed mode agrees with cleartext wherever containment is not "
          "involved",
          "[policy]") {
  SeededRng rng(31337);
  for (int i = 0; i < 400; ++i) {
    auto inst = testgen::random_instance(rng);
    INFO("instance " << i);
    // Containment-style evidence is cleartext-only by design, so compare the
    // two modes over the instance with derived fields stripped out.
    std::vector<DataRecord> stripped;
    for (const DataRecord* r : inst.candidates) {
      DataRecord copy = *r;
      std::erase_if(copy.fields,
                    [](const DataField& f) { return f.derived; });
      stripped.push_back(std::move(copy));
    }
    auto clear = match_records(inst.cleartext_claims, ptrs(stripped),
                               inst.policy, inst.sensitivity, inst.ctx);
    auto hashed = match_records(inst.hashed_claims, ptrs(stripped),
                                inst.policy, inst.sensitivity, inst.ctx);
    REQUIRE(clear == hashed);
  }
}

TEST_CASE("removing a claim never adds matches", "[policy]") {
  SeededRng rng(9001);
  int compared = 0;
  for (int i = 0; i < 400; ++i) {
    auto inst = testgen::random_instance(rng);
    if (inst.disclosed_values.empty()) continue;
    INFO("instance " << i);
    auto full = match_records(inst.cleartext_claims, inst.candidates,
                              inst.policy, inst.sensitivity, inst.ctx);
    auto fewer_values = inst.disclosed_values;
    fewer_values.pop_back();
    auto fewer_claims = DisclosedClaims::from_values(
        DisclosureMode::cleartext, inst.cleartext_claims.nonce, fewer_values);
    auto fewer = match_records(fewer_claims, inst.candidates, inst.policy,
                               inst.sensitivity, inst.ctx);
    REQUIRE(std::includes(full.matched_records.begin(),
                          full.matched_records.end(),
                          fewer.matched_records.begin(),
                          fewer.matched_records.end()));
    ++compared;
  }
  CHECK(compared > 300);
}

TEST_CASE("derived contribution never exceeds the cap", "[policy]") {
  SeededRng rng(777);
  for (int i = 0; i < 300; ++i) {
    auto inst = testgen::random_instance(rng);
    INFO("instance " << i);
    for (const DataRecord* r : inst.candidates) {
      auto s = score_match(inst.cleartext_claims, *r, inst.policy, inst.ctx);
      REQUIRE_FALSE(inst.policy.derived_cap < s.derived_contribution);
      REQUIRE_FALSE(s.score < s.derived_contribution);
    }
  }
}

TEST_CASE("raising sensitivity never widens the matched set", "[policy]") {
  SeededRng rng(424242);
  for (int i = 0; i < 300; ++i) {
    auto inst = testgen::random_instance(rng);
    INFO("instance " << i);
    auto normal = match_records(inst.cleartext_claims, inst.candidates,
                                inst.policy, Sensitivity::normal, inst.ctx);
    auto special = match_records(inst.cleartext_claims, inst.candidates,
                                 inst.policy, Sensitivity::special_category,
                                 inst.ctx);
    REQUIRE(std::includes(normal.matched_records.begin(),
                          normal.matched_records.end(),
                          special.matched_records.begin(),
                          special.matched_records.end()));
  }
}
