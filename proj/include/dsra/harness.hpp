// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// Multi-party simulation: a scenario file describes a synthetic population,
// a service-provider store grown from it (with optional noise), an adversary,
// and a flow; run_scenario() stands the four actors up, drives one rights
// request per trial, and measures what happened. Everything is seeded: the
// same scenario produces byte-identical transcripts on every run and on
// either transport, which is itself one of the properties under test.
//
// Ground truth comes from construction, not from re-running the matcher: the
// generator remembers which person each store record came from and which
// fields noise corrupted, so false accepts are provenance mismatches and
// false rejects are declines of requesters whose intact overlap was provably
// sufficient. At desk scale (10 records, 8 attributes) every trial is
// additionally checked against the brute-force oracle.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsra/actors.hpp"
#include "dsra/httpnet.hpp"
#include "dsra/oracle.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

struct PopulationSpec {
  std::size_t size = 10;
  std::size_t given_pool = 8;   // distinct given names to draw from (max 32)
  std::size_t family_pool = 8;  // distinct family names (max 32)
  std::size_t birth_pool = 400; // distinct birth dates; small values collide
};

struct StoreSpec {
  std::vector<AttributeId> attributes = {"pid.given_name", "pid.family_name",
                                         "pid.birth_date"};
  Rational coverage{1};   // probability a person has a record
  Rational typo_rate{0};  // per stored field: corrupt one character
  Rational stale_rate{0}; // per stored field: an out-of-date but valid value
  std::size_t strangers = 0;  // records of people who never make requests
};

struct AdversarySpec {
  enum class Kind {
    none,
    impersonator,        // valid eID that shares k values with a target
    probing_sp,          // provider fabricates challenges to the wallet
    malicious_idp_probe, // identity provider fabricates mediated requests
    replayer,            // re-delivers every captured request envelope
    expired_wallet       // every presented credential is past its window
  };
  Kind kind = Kind::none;
  std::size_t known_attributes = 2;  // impersonator: values shared with target
  std::size_t probes = 5;            // probing adversaries: attempt count
};

inline std::string_view adversary_kind_name(AdversarySpec::Kind k) {
  switch (k) {
    case AdversarySpec::Kind::none: return "none";
    case AdversarySpec::Kind::impersonator: return "impersonator";
    case AdversarySpec::Kind::probing_sp: return "probing_sp";
    case AdversarySpec::Kind::malicious_idp_probe:
      return "malicious_idp_probe";
    case AdversarySpec::Kind::replayer: return "replayer";
    case AdversarySpec::Kind::expired_wallet: return "expired_wallet";
  }
  return "none";
}

inline AdversarySpec::Kind adversary_kind_parse(std::string_view s) {
  if (s == "none") return AdversarySpec::Kind::none;
  if (s == "impersonator") return AdversarySpec::Kind::impersonator;
  if (s == "probing_sp") return AdversarySpec::Kind::probing_sp;
  if (s == "malicious_idp_probe")
    return AdversarySpec::Kind::malicious_idp_probe;
  if (s == "replayer") return AdversarySpec::Kind::replayer;
  if (s == "expired_wallet") return AdversarySpec::Kind::expired_wallet;
  throw ConfigError("unknown adversary kind '" + std::string(s) + "'");
}

/// Expected aggregate outcomes; any field present becomes an assertion.
struct ScenarioExpect {
  std::optional<std::int64_t> accepts;
  std::optional<std::int64_t> declines;
  std::optional<std::int64_t> false_accepts;
  std::optional<std::int64_t> false_rejects;
  std::optional<std::int64_t> privacy_violations;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::string clock = "2026-08-19T12:00:00Z";
  Flow flow = Flow::ssi;
  DsrType dsr = DsrType::access;
  DisclosureMode mode = DisclosureMode::cleartext;
  PopulationSpec population;
  StoreSpec store;
  AdversarySpec adversary;
  MatchPolicy policy;
  std::string consent = "approve_all";
  std::size_t trials = 0;  // 0 = one per population member
  ScenarioExpect expect;

  std::size_t trial_count() const {
    return trials != 0 ? trials : population.size;
  }
};

namespace harness_detail {

inline void reject_unknown_keys(const Json& j, const char* where,
                                std::initializer_list<const char*> known) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + " must be a json object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok)
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

inline std::int64_t get_count(const Json& j, const char* key,
                              std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  std::int64_t v = j[key].get<std::int64_t>();
  if (v < 0) throw ConfigError(std::string(key) + " must be >= 0");
  return v;
}

inline Rational get_rate(const Json& j, const char* key, Rational fallback) {
  if (!j.contains(key)) return fallback;
  Rational r = rational_from_json(j[key]);
  if (r < Rational{0} || Rational{1} < r)
    throw ConfigError(std::string(key) + " must be within [0, 1]");
  return r;
}

}  // namespace harness_detail

inline Scenario scenario_from_json(const Json& j) {
  using harness_detail::get_count;
  using harness_detail::get_rate;
  using harness_detail::reject_unknown_keys;
  if (!j.is_object()) throw ConfigError("scenario must be a json object");
  reject_unknown_keys(j, "scenario",
                      {"name", "seed", "clock", "flow", "dsr", "mode",
                       "population", "store", "adversary", "policy",
                       "consent", "trials", "expect"});
  Scenario sc;
  if (j.contains("name")) sc.name = j["name"].get<std::string>();
  if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("clock")) {
    sc.clock = j["clock"].get<std::string>();
    try {
      UtcTime::from_iso(sc.clock);  // validate now, not mid-run
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("flow")) sc.flow = flow_parse(j["flow"].get<std::string>());
  if (j.contains("dsr")) sc.dsr = dsr_type_parse(j["dsr"].get<std::string>());
  if (j.contains("mode"))
    sc.mode = disclosure_mode_parse(j["mode"].get<std::string>());
  if (j.contains("trials"))
    sc.trials = static_cast<std::size_t>(get_count(j, "trials", 0));

  if (j.contains("population")) {
    const Json& p = j["population"];
    reject_unknown_keys(p, "population",
                        {"size", "given_pool", "family_pool", "birth_pool"});
    sc.population.size = static_cast<std::size_t>(get_count(p, "size", 10));
    sc.population.given_pool =
        static_cast<std::size_t>(get_count(p, "given_pool", 8));
    sc.population.family_pool =
        static_cast<std::size_t>(get_count(p, "family_pool", 8));
    sc.population.birth_pool =
        static_cast<std::size_t>(get_count(p, "birth_pool", 400));
    if (sc.population.size == 0)
      throw ConfigError("population.size must be positive");
    if (sc.population.given_pool == 0 || sc.population.given_pool > 32 ||
        sc.population.family_pool == 0 || sc.population.family_pool > 32)
      throw ConfigError("name pools must be within [1, 32]");
    if (sc.population.birth_pool == 0 || sc.population.birth_pool > 10000)
      throw ConfigError("population.birth_pool must be within [1, 10000]");
  }

  if (j.contains("store")) {
    const Json& s = j["store"];
    reject_unknown_keys(
        s, "store",
        {"attributes", "coverage", "typo_rate", "stale_rate", "strangers"});
    if (s.contains("attributes")) {
      sc.store.attributes.clear();
      for (const auto& a : s["attributes"])
        sc.store.attributes.push_back(a.get<std::string>());
    }
    sc.store.coverage = get_rate(s, "coverage", Rational{1});
    sc.store.typo_rate = get_rate(s, "typo_rate", Rational{0});
    sc.store.stale_rate = get_rate(s, "stale_rate", Rational{0});
    sc.store.strangers =
        static_cast<std::size_t>(get_count(s, "strangers", 0));
  }
  if (sc.store.attributes.empty())
    throw ConfigError("store.attributes must not be empty");
  static const std::set<std::string> kStorable{
      "pid.given_name", "pid.family_name", "pid.birth_date", "pid.unique_id",
      "pid.address"};
  for (const auto& a : sc.store.attributes)
    if (!kStorable.count(a))
      throw ConfigError("store.attributes: '" + a +
                        "' is not a generated person attribute");

  if (j.contains("adversary")) {
    const Json& a = j["adversary"];
    reject_unknown_keys(a, "adversary", {"kind", "known_attributes", "probes"});
    if (!a.contains("kind"))
      throw ConfigError("adversary.kind is required");
    sc.adversary.kind = adversary_kind_parse(a["kind"].get<std::string>());
    sc.adversary.known_attributes =
        static_cast<std::size_t>(get_count(a, "known_attributes", 2));
    sc.adversary.probes = static_cast<std::size_t>(get_count(a, "probes", 5));
  }

  if (j.contains("policy")) sc.policy = policy_from_json(j["policy"]);
  if (j.contains("consent")) {
    sc.consent = j["consent"].get<std::string>();
    ConsentScript::parse(sc.consent);  // validate eagerly
  }

  if (j.contains("expect")) {
    const Json& e = j["expect"];
    reject_unknown_keys(e, "expect",
                        {"accepts", "declines", "false_accepts",
                         "false_rejects", "privacy_violations"});
    auto opt = [&](const char* key) -> std::optional<std::int64_t> {
      if (!e.contains(key)) return std::nullopt;
      return e[key].get<std::int64_t>();
    };
    sc.expect.accepts = opt("accepts");
    sc.expect.declines = opt("declines");
    sc.expect.false_accepts = opt("false_accepts");
    sc.expect.false_rejects = opt("false_rejects");
    sc.expect.privacy_violations = opt("privacy_violations");
  }

  if (sc.adversary.kind == AdversarySpec::Kind::impersonator) {
    std::size_t sharable = 0;
    for (const auto& a : sc.store.attributes)
      if (a != kUniqueId) ++sharable;
    if (sc.adversary.known_attributes > sharable)
      throw ConfigError(
          "impersonator cannot know more attribute values than the store "
          "holds in non-unique types");
  }
  if (sc.adversary.kind == AdversarySpec::Kind::malicious_idp_probe &&
      sc.flow != Flow::fim)
    throw ConfigError("malicious_idp_probe requires the fim flow");
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureMissing("scenario file '" + path + "' not found");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return scenario_from_json(Json::parse(text));
  } catch (const Json::exception&) {
    throw ConfigError("scenario file '" + path + "' is not valid JSON");
  }
}

// ---------------------------------------------------------------------------
// Synthetic population and store
// ---------------------------------------------------------------------------

struct SynthPerson {
  std::string id;
  std::map<AttributeId, std::string> attrs;      // raw values
  std::map<AttributeId, std::string> canonical;  // derived once, reused
};

namespace harness_detail {

inline const std::vector<std::string>& given_names() {
  static const std::vector<std::string> v{
      "Erika",  "Max",    "Ada",    "Grace",  "Jorge",  "Mina",   "Tomas",
      "Ines",   "Pavel",  "Lena",   "Oskar",  "Aiko",   "Ravi",   "Nora",
      "Felix",  "Dana",   "Hugo",   "Petra",  "Ivan",   "Sofia",  "Emil",
      "Carla",  "Anton",  "Ruth",   "Boris",  "Alma",   "Jonas",  "Vera",
      "Karim",  "Elsa",   "Mateo",  "Ida"};
  return v;
}

inline const std::vector<std::string>& family_names() {
  static const std::vector<std::string> v{
      "Mustermann", "Meier",    "Schulz",   "Novak",   "Silva",   "Haas",
      "Kovacs",     "Lindgren", "Costa",    "Weber",   "Petrov",  "Tanaka",
      "Olsen",      "Greco",    "Fischer",  "Adler",   "Brandt",  "Dvorak",
      "Engel",      "Falk",     "Gruber",   "Hofer",   "Jansen",  "Keller",
      "Lorenz",     "Moser",    "Neumann",  "Orban",   "Pichler", "Quast",
      "Richter",    "Sommer"};
  return v;
}

/// Deterministic calendar date for a pool index: days after 1960-01-01,
/// rendered through UtcTime so leap years come out right.
inline std::string birth_date_for(std::size_t index) {
  UtcTime base = UtcTime::from_iso("1960-01-01T00:00:00Z");
  std::string iso = base.plus_days(static_cast<std::int64_t>(index)).iso();
  return iso.substr(0, 10);
}

inline std::string address_for(std::size_t street, std::size_t postal) {
  return "Ring " + std::to_string(1 + street % 200) + ", " +
         std::to_string(10000 + (postal % 80000)) + " Stadt " +
         std::to_string(1 + postal % 30);
}

/// Adversary addresses live in a disjoint street namespace so an
/// impersonator's own address can never collide with a stored one.
inline std::string foreign_address_for(std::size_t n) {
  return "Weg " + std::to_string(1 + n % 977) + ", 99" +
         std::to_string(100 + n % 900) + " Dorf";
}

/// Exact-rational coin flip: true with probability num/den.
inline bool rate_hit(Rng& rng, const Rational& rate) {
  if (rate.num() == 0) return false;
  if (rate == Rational{1}) return true;
  return rng.bounded(static_cast<std::uint64_t>(rate.den())) <
         static_cast<std::uint64_t>(rate.num());
}

/// A different surface form of the same value, so stores exercise the
/// canonicalization layer: dates flip to day-first, names change case.
inline std::string vary_form(const AttributeId& attr, const std::string& raw,
                             Rng& rng) {
  std::uint64_t pick = rng.bounded(3);
  if (pick == 0) return raw;
  if (attr == "pid.birth_date") {
    // raw is YYYY-MM-DD
    return raw.substr(8, 2) + "." + raw.substr(5, 2) + "." + raw.substr(0, 4);
  }
  std::string out = raw;
  if (pick == 1)
    for (char& c : out) c = static_cast<char>(std::toupper(
        static_cast<unsigned char>(c)));
  else
    for (char& c : out) c = static_cast<char>(std::tolower(
        static_cast<unsigned char>(c)));
  return out;
}

/// Corrupt one character so the canonical value changes (or stops parsing,
/// which is equally a non-match).
inline std::string typo(const std::string& raw, Rng& rng) {
  if (raw.empty()) return "x";
  std::string out = raw;
  std::size_t pos = rng.bounded(out.size());
  out[pos] = out[pos] == 'x' ? 'y' : 'x';
  return out;
}

}  // namespace harness_detail

/// People with stable attribute values. Pool sizes control collision
/// pressure: a small pool means many namesakes.
inline std::vector<SynthPerson> make_population(const PopulationSpec& spec,
                                                Rng& rng,
                                                const AttributeRegistry& reg) {
  using namespace harness_detail;
  std::vector<SynthPerson> out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    SynthPerson p;
    p.id = "p-" + std::to_string(i);
    p.attrs["pid.given_name"] = given_names()[rng.bounded(spec.given_pool)];
    p.attrs["pid.family_name"] = family_names()[rng.bounded(spec.family_pool)];
    p.attrs["pid.birth_date"] = birth_date_for(rng.bounded(spec.birth_pool));
    char uid[16];
    std::snprintf(uid, sizeof uid, "ID-%06zu", i);
    p.attrs[kUniqueId] = uid;
    p.attrs["pid.address"] =
        address_for(rng.bounded(1000), rng.bounded(100000));
    for (const auto& [id, raw] : p.attrs)
      p.canonical[id] = canonicalize(reg.get(id), raw).text;
    out.push_back(std::move(p));
  }
  return out;
}

/// Which person a record belongs to and which of its fields still carry the
/// person's true value (noise knocks fields out of this set).
struct StoreProvenance {
  std::map<std::string, std::string> owner;           // record_id -> person id
  std::map<std::string, std::set<AttributeId>> intact; // record_id -> attrs
  std::set<std::string> held_canonicals;  // every canonical byte string stored
};

inline Store make_store(const StoreSpec& spec,
                        const std::vector<SynthPerson>& population, Rng& rng,
                        const AttributeRegistry& reg, StoreProvenance& prov) {
  using namespace harness_detail;
  Store store(reg);
  DataSet main;
  main.dataset_id = "main";
  std::size_t next_record = 0;

  auto add_record = [&](const SynthPerson& person, bool corruptible) {
    std::string rid = "r-" + std::to_string(next_record++);
    DataRecord rec;
    rec.record_id = rid;
    for (const auto& attr_id : spec.attributes) {
      auto held = person.attrs.find(attr_id);
      if (held == person.attrs.end()) continue;
      std::string raw = vary_form(attr_id, held->second, rng);
      if (corruptible && rate_hit(rng, spec.typo_rate)) {
        raw = typo(raw, rng);
      } else if (corruptible && rate_hit(rng, spec.stale_rate)) {
        // A stale value: a *valid* value the person no longer has. Use the
        // neighbouring pool entry so it stays realistic and parseable.
        if (attr_id == "pid.given_name")
          raw = given_names()[(rng.bounded(32) + 1) % 32];
        else if (attr_id == "pid.family_name")
          raw = family_names()[(rng.bounded(32) + 1) % 32];
        else if (attr_id == "pid.birth_date")
          raw = birth_date_for(rng.bounded(40000));
        else if (attr_id == "pid.address")
          raw = address_for(rng.bounded(1000), rng.bounded(100000));
        else
          raw = "ID-STALE-" + std::to_string(rng.bounded(100000));
      }
      DataField f;
      f.attr = reg.get(attr_id);
      f.label = attr_id;
      f.raw = raw;
      f.derived = false;
      try {
        f.canonical = canonicalize(*f.attr, raw).text;
      } catch (const UnparseableValue&) {
        f.canonical = std::nullopt;
      }
      if (f.canonical) prov.held_canonicals.insert(*f.canonical);
      // Noise can collide back onto the true value (a stale pick may draw
      // the same entry), so intactness is a canonical comparison, not a flag.
      if (f.canonical && *f.canonical == person.canonical.at(attr_id))
        prov.intact[rid].insert(attr_id);
      rec.fields.push_back(std::move(f));
    }
    prov.owner[rid] = person.id;
    prov.intact.try_emplace(rid);
    main.records.push_back(std::move(rec));
  };

  for (const auto& person : population)
    if (rate_hit(rng, spec.coverage)) add_record(person, true);

  // Strangers: records with no corresponding requester. Drawn from the same
  // pools so they collide with real people at the same rate.
  PopulationSpec stranger_spec;
  stranger_spec.size = spec.strangers;
  if (spec.strangers > 0) {
    std::vector<SynthPerson> strangers =
        make_population(stranger_spec, rng, reg);
    for (auto& s : strangers) {
      s.id = "stranger-" + s.id;
      s.attrs[kUniqueId] = "XX-" + s.attrs[kUniqueId];
      s.canonical[kUniqueId] =
          canonicalize(reg.get(kUniqueId), s.attrs[kUniqueId]).text;
      add_record(s, false);
    }
  }

  store.add_dataset(std::move(main));
  return store;
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct TrialOutcome {
  std::string request_id;
  std::string person_id;
  bool accepted = false;
  std::optional<bool> expected_accept;  // construction knowledge; may be unknown
  std::vector<std::string> matched_record_ids;  // access flow exports
  bool oracle_checked = false;
  bool oracle_agrees = true;
};

struct AssertionResult {
  std::string name;
  bool ok = true;
  std::string detail;
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string transport;
  std::string flow;
  std::string mode;
  std::string dsr;
  std::string adversary;
  std::uint64_t requests = 0;
  std::uint64_t accepts = 0;
  std::uint64_t declines = 0;
  std::uint64_t false_accepts = 0;
  std::uint64_t false_rejects = 0;
  std::uint64_t notifications_sent = 0;
  std::uint64_t notifications_expected = 0;
  std::uint64_t privacy_violations = 0;
  std::uint64_t oracle_checked = 0;
  std::uint64_t oracle_disagreements = 0;
  std::vector<AssertionResult> assertions;
  std::vector<TrialOutcome> trials;  // not serialized; for callers and tests
  std::string transcript_path;
  std::string report_path;

  std::uint64_t assertions_failed() const {
    std::uint64_t n = 0;
    for (const auto& a : assertions)
      if (!a.ok) ++n;
    return n;
  }

  Json to_json() const {
    Json asserts = Json::array();
    for (const auto& a : assertions)
      asserts.push_back(
          Json{{"name", a.name}, {"ok", a.ok}, {"detail", a.detail}});
    return Json{{"scenario", scenario},
                {"seed", seed},
                {"transport", transport},
                {"flow", flow},
                {"mode", mode},
                {"dsr", dsr},
                {"adversary", adversary},
                {"requests", requests},
                {"accepts", accepts},
                {"declines", declines},
                {"false_accepts", false_accepts},
                {"false_rejects", false_rejects},
                {"notifications_sent", notifications_sent},
                {"notifications_expected", notifications_expected},
                {"privacy_violations", privacy_violations},
                {"oracle_checked", oracle_checked},
                {"oracle_disagreements", oracle_disagreements},
                {"assertions", asserts},
                {"assertions_failed", assertions_failed()},
                {"transcript",
                 std::filesystem::path(transcript_path).filename().string()}};
  }

  std::string summary() const {
    std::string out;
    out += "scenario " + scenario + " (seed " + std::to_string(seed) +
           ", " + transport + ", " + flow + "/" + mode + "/" + dsr +
           ", adversary " + adversary + ")\n";
    out += "  requests " + std::to_string(requests) + ": " +
           std::to_string(accepts) + " accepted, " +
           std::to_string(declines) + " declined\n";
    out += "  false accepts " + std::to_string(false_accepts) +
           ", false rejects " + std::to_string(false_rejects) + "\n";
    out += "  notifications " + std::to_string(notifications_sent) + "/" +
           std::to_string(notifications_expected) + ", privacy violations " +
           std::to_string(privacy_violations) + "\n";
    if (oracle_checked > 0)
      out += "  oracle: " + std::to_string(oracle_checked) + " checked, " +
             std::to_string(oracle_disagreements) + " disagreements\n";
    for (const auto& a : assertions)
      out += std::string("  [") + (a.ok ? "ok" : "FAIL") + "] " + a.name +
             (a.detail.empty() || a.ok ? "" : ": " + a.detail) + "\n";
    return out;
  }
};

enum class TransportKind { in_process, http };

inline std::string_view transport_kind_name(TransportKind k) {
  return k == TransportKind::in_process ? "inproc" : "http";
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace harness_detail {

/// One tapped wire event as a canonical, single-line JSON record. Connection
/// metadata never enters the line, so in-process and HTTP runs emit the same
/// bytes.
inline std::string transcript_line(const WireEvent& e) {
  return canonical_dump(Json{{"kind", "wire"},
                             {"seq", e.seq},
                             {"from", e.from},
                             {"to", e.to},
                             {"method", e.request.method},
                             {"path", e.request.path},
                             {"request", e.request.body},
                             {"status", e.reply.status},
                             {"reply", e.reply.body}});
}

struct ParsedResult {
  bool is_result = false;
  bool accepted = false;
  std::vector<std::string> matched_record_ids;
};

inline ParsedResult parse_dsr_result(const WireReply& reply) {
  ParsedResult out;
  if (reply.status != 200) return out;
  Json j;
  try {
    j = Json::parse(reply.body);
  } catch (const Json::exception&) {
    return out;
  }
  if (!j.is_object() || !j.contains("type") || j["type"] != "dsr_result")
    return out;
  out.is_result = true;
  out.accepted = j.contains("status") && j["status"] == "fulfilled";
  if (out.accepted && j.contains("payload") && j["payload"].is_object() &&
      j["payload"].contains("records"))
    for (const auto& rec : j["payload"]["records"])
      if (rec.contains("record_id"))
        out.matched_record_ids.push_back(rec["record_id"].get<std::string>());
  return out;
}

/// The claims a wallet would disclose for this person under this consent:
/// requested catalog ∩ held ∩ consented, as canonical values. Used for the
/// desk-scale oracle cross-check.
inline std::vector<std::pair<AttributeType, std::string>> disclosed_for(
    const SynthPerson& person, const std::vector<AttributeType>& catalog,
    const ConsentScript& consent) {
  std::vector<std::pair<AttributeType, std::string>> out;
  if (consent.kind == ConsentScript::Kind::deny ||
      consent.kind == ConsentScript::Kind::timeout)
    return out;
  for (const auto& type : catalog) {
    auto held = person.canonical.find(type.id);
    if (held == person.canonical.end()) continue;
    if (consent.kind == ConsentScript::Kind::approve_listed &&
        consent.listed.count(type.id) == 0)
      continue;
    out.emplace_back(type, held->second);
  }
  return out;
}

}  // namespace harness_detail

/// Stand up issuer, identity provider, service provider, and wallet; run one
/// rights request per trial plus whatever the adversary adds; write a JSONL
/// transcript and a JSON report into `out_dir`; return the report. With
/// `throw_on_assertion` (the default), a failed invariant raises
/// AssertionFailure -- after the transcript and report are on disk.
inline RunReport run_scenario(const Scenario& sc, const std::string& out_dir,
                              TransportKind transport = TransportKind::in_process,
                              bool throw_on_assertion = true) {
  using namespace harness_detail;
  const std::string issuer_id = "issuer.test";
  const std::string idp_id = "idp.test";
  const std::string sp_id = "sp.test";
  const std::string wallet_id = "wallet.test";
  const AttributeRegistry registry = AttributeRegistry::with_defaults();
  const bool fim = sc.flow == Flow::fim;
  const std::size_t trials = sc.trial_count();

  // --- generation ---------------------------------------------------------
  SeededRng gen(sc.seed);
  std::vector<SynthPerson> population =
      make_population(sc.population, gen, registry);
  StoreProvenance prov;
  Store store = make_store(sc.store, population, gen, registry, prov);

  // Impersonators are separate synthetic people whose chosen attribute
  // values coincide with a target's -- the honest issuer attests what they
  // genuinely are, namesakes included. They own nothing in the store.
  std::vector<SynthPerson> adversaries;
  const bool impersonation =
      sc.adversary.kind == AdversarySpec::Kind::impersonator;
  if (impersonation) {
    std::vector<AttributeId> sharable;
    for (const auto& a : sc.store.attributes)
      if (a != kUniqueId) sharable.push_back(a);
    // The adversary's own values come from spaces the population never
    // draws from (names beyond the pools, later birth years, a disjoint
    // address namespace), so exactly the k copied values can match.
    auto beyond = [&](const std::vector<std::string>& table,
                      std::size_t pool) {
      return pool < table.size()
                 ? table[pool + gen.bounded(table.size() - pool)]
                 : table[gen.bounded(table.size())];
    };
    for (std::size_t i = 0; i < trials; ++i) {
      const SynthPerson& target = population[i % population.size()];
      SynthPerson adv;
      adv.id = "adv-" + std::to_string(i);
      char uid[24];
      std::snprintf(uid, sizeof uid, "AD-%06zu", i);
      adv.attrs[kUniqueId] = uid;
      adv.attrs["pid.given_name"] =
          beyond(harness_detail::given_names(), sc.population.given_pool);
      adv.attrs["pid.family_name"] =
          beyond(harness_detail::family_names(), sc.population.family_pool);
      adv.attrs["pid.birth_date"] =
          harness_detail::birth_date_for(15000 + gen.bounded(5000));
      adv.attrs["pid.address"] =
          harness_detail::foreign_address_for(gen.bounded(100000));
      // Overwrite k of the sharable store attributes with the target's
      // values; the subset is drawn per trial.
      std::vector<AttributeId> picks = sharable;
      for (std::size_t s = 0; s < sc.adversary.known_attributes; ++s) {
        std::size_t at = s + gen.bounded(picks.size() - s);
        std::swap(picks[s], picks[at]);
        adv.attrs[picks[s]] = target.attrs.at(picks[s]);
      }
      for (const auto& [id, raw] : adv.attrs)
        adv.canonical[id] = canonicalize(registry.get(id), raw).text;
      adversaries.push_back(std::move(adv));
    }
  }

  std::map<std::string, std::map<AttributeId, std::string>> issuer_persons;
  for (const auto& p : population) issuer_persons[p.id] = p.attrs;
  for (const auto& a : adversaries) issuer_persons[a.id] = a.attrs;

  // --- actors --------------------------------------------------------------
  auto clock = std::make_shared<FixedClock>(sc.clock);
  SeededRng keyrng(sc.seed ^ 0x5eed);
  KeyPair issuer_key = ed25519::keygen(keyrng);
  IssuerActor issuer(issuer_id, issuer_persons, issuer_key.secret, registry,
                     clock, sc.seed ^ 0x1);
  IdpActor idp(idp_id, issuer_key.public_key, registry, clock);
  SpActor sp(sp_id, std::move(store), sc.policy, sc.mode, clock,
             sc.seed ^ 0x2);
  WalletActor wallet(wallet_id, ConsentScript::parse(sc.consent), clock);

  std::unique_ptr<InProcessTransport> inproc;
  std::unique_ptr<HttpTransport> http;
  std::vector<std::unique_ptr<ActorServer>> servers;
  Transport* net = nullptr;
  if (transport == TransportKind::in_process) {
    inproc = std::make_unique<InProcessTransport>();
    for (Actor* a :
         std::initializer_list<Actor*>{&issuer, &idp, &sp, &wallet})
      inproc->attach(*a);
    net = inproc.get();
  } else {
    http = std::make_unique<HttpTransport>();
    for (Actor* a :
         std::initializer_list<Actor*>{&issuer, &idp, &sp, &wallet}) {
      auto server = std::make_unique<ActorServer>();
      server->start(*a, "127.0.0.1:0");
      http->add_peer(a->actor_id(), server->url());
      servers.push_back(std::move(server));
    }
    net = http.get();
  }
  idp.wire(net, issuer_id);
  sp.wire(net, idp_id);
  wallet.wire(net);

  std::vector<std::string> transcript;
  net->set_tap([&](const WireEvent& e) {
    transcript.push_back(transcript_line(e));
  });

  // --- report skeleton -----------------------------------------------------
  RunReport report;
  report.scenario = sc.name;
  report.seed = sc.seed;
  report.transport = std::string(transport_kind_name(transport));
  report.flow = std::string(flow_name(sc.flow));
  report.mode = std::string(disclosure_mode_name(sc.mode));
  report.dsr = std::string(dsr_type_name(sc.dsr));
  report.adversary = std::string(adversary_kind_name(sc.adversary.kind));

  auto assert_that = [&](const std::string& name, bool ok,
                         const std::string& detail) {
    report.assertions.push_back(AssertionResult{name, ok, detail});
  };

  // --- setup phase ----------------------------------------------------------
  const ConsentScript consent_script = ConsentScript::parse(sc.consent);
  const bool expired = sc.adversary.kind == AdversarySpec::Kind::expired_wallet;
  if (fim) {
    for (const auto& p : population) {
      wallet.acquire_bundle(issuer_id, p.id, {}, expired ? 1 : 365);
      wallet.register_at_idp(idp_id, "h-" + p.id);
    }
    // Impersonators hold genuine eIDs of their own and register like anyone
    // else; what they share with a target is attribute values, not keys.
    for (const auto& a : adversaries) {
      wallet.acquire_bundle(issuer_id, a.id, {});
      wallet.register_at_idp(idp_id, "h-" + a.id);
    }
  } else if (expired) {
    for (const auto& p : population)
      wallet.acquire_bundle(issuer_id, p.id, {}, 1);
  }
  if (expired) clock->advance_days(2);

  // Desk-scale runs get every trial cross-checked against the brute-force
  // oracle (wallet flow only; the mediated flow pools values per type and
  // has no per-record claim set to hand the oracle).
  const std::vector<AttributeId> catalog_ids = sp.store().attribute_catalog();
  std::vector<AttributeType> catalog;
  for (const auto& id : catalog_ids) catalog.push_back(registry.get(id));
  const bool desk_scale = !fim && !expired &&
                          sp.store().record_count() <= 10 &&
                          catalog_ids.size() <= 8;

  // --- trials ---------------------------------------------------------------
  std::set<std::string> decline_bodies;
  struct TrialEnvelope {
    std::string request_id;
    const SynthPerson* person;
    std::string reply_body;
  };
  std::vector<TrialEnvelope> trial_envelopes;
  for (std::size_t i = 0; i < trials; ++i) {
    const SynthPerson& person =
        impersonation ? adversaries[i] : population[i % population.size()];
    char rid[32];
    std::snprintf(rid, sizeof rid, "t-%05zu", i);
    TrialOutcome trial;
    trial.request_id = rid;
    trial.person_id = person.id;

    // Ground truth first -- erasure trials shrink the store, so expectation
    // and oracle verdict must be taken against the store the matcher will
    // see. Impersonators and expired credentials must never be accepted;
    // honest requesters are expected in when some still-present record of
    // theirs has enough intact, consented overlap to clear the policy on its
    // own. (The liveness check matters: a namesake's earlier erasure trial
    // can legitimately take a record away.)
    if (impersonation || expired) {
      trial.expected_accept = false;
    } else if (fim) {
      // Mediated flow: the provider pools its stored values per attribute
      // and the verifier scores the registered attestation against those
      // pools -- consent was spent at registration, so it does not filter
      // here. Unique types short-circuit exactly as in the engine.
      std::map<AttributeId, std::set<std::string>> pools;
      if (const DataSet* ds = sp.store().dataset("main"))
        for (const auto& r : ds->records)
          for (const auto& f : r.fields)
            if (f.attr && f.canonical) pools[f.attr->id].insert(*f.canonical);
      Rational score{0};
      bool unique_hit = false;
      for (const auto& [attr, value] : person.canonical) {
        auto it = pools.find(attr);
        if (it == pools.end() || it->second.count(value) == 0) continue;
        score += sc.policy.weight(attr);
        if (sc.policy.unique_types.count(attr)) unique_hit = true;
      }
      trial.expected_accept =
          unique_hit || !(score < sc.policy.base_threshold);
    } else {
      const DataSet* live = sp.store().dataset("main");
      bool expected = false;
      for (const auto& [record_id, owner] : prov.owner) {
        if (owner != person.id) continue;
        if (!live || !live->find(record_id)) continue;
        Rational score{0};
        bool unique_hit = false;
        for (const auto& attr : prov.intact.at(record_id)) {
          if (consent_script.kind == ConsentScript::Kind::deny ||
              consent_script.kind == ConsentScript::Kind::timeout)
            continue;
          if (consent_script.kind == ConsentScript::Kind::approve_listed &&
              consent_script.listed.count(attr) == 0)
            continue;
          score += sc.policy.weight(attr);
          if (sc.policy.unique_types.count(attr)) unique_hit = true;
        }
        if (unique_hit || !(score < sc.policy.base_threshold))
          expected = true;
      }
      trial.expected_accept = expected;
    }

    std::optional<bool> oracle_accepts;
    if (desk_scale) {
      std::vector<const DataRecord*> candidates;
      Sensitivity sensitivity = Sensitivity::normal;
      if (const DataSet* ds = sp.store().dataset("main")) {
        for (const auto& r : ds->records) candidates.push_back(&r);
        sensitivity = ds->sensitivity;
      }
      auto disclosed = disclosed_for(person, catalog, consent_script);
      AuthDecision decision =
          oracle_match(disclosed, candidates, sc.policy, sensitivity,
                       clock->now().date());
      oracle_accepts = decision.verdict == Verdict::accept;
    }

    if (!fim && !expired) wallet.acquire_bundle(issuer_id, person.id, {});
    WireReply reply =
        fim ? wallet.initiate_fim(idp_id, sp_id, rid, sc.dsr,
                                  Scope::everything(), "h-" + person.id)
            : wallet.initiate_ssi(sp_id, rid, sc.dsr, Scope::everything());

    ParsedResult res = parse_dsr_result(reply);
    trial.accepted = res.is_result && res.accepted;
    trial.matched_record_ids = res.matched_record_ids;
    if (res.is_result && !res.accepted) decline_bodies.insert(reply.body);
    ++report.requests;
    (trial.accepted ? report.accepts : report.declines)++;

    // A false accept is an accept the requester had no right to. In the
    // wallet flow an access answer names the exported records, so provenance
    // decides; wallet-flow erasure and the mediated flow (which by design
    // executes over the whole requested scope once identity is vouched) fall
    // back to construction knowledge.
    bool false_accept = false;
    if (trial.accepted) {
      if (impersonation || expired) {
        false_accept = true;
      } else if (!fim && sc.dsr == DsrType::access) {
        for (const auto& rid2 : trial.matched_record_ids)
          if (prov.owner.count(rid2) && prov.owner.at(rid2) != person.id)
            false_accept = true;
      } else {
        false_accept =
            trial.expected_accept.has_value() && !*trial.expected_accept;
      }
    }
    if (false_accept) ++report.false_accepts;
    if (!trial.accepted && trial.expected_accept.value_or(false))
      ++report.false_rejects;

    if (oracle_accepts.has_value()) {
      trial.oracle_checked = true;
      trial.oracle_agrees = *oracle_accepts == trial.accepted;
      ++report.oracle_checked;
      if (!trial.oracle_agrees) ++report.oracle_disagreements;
    }

    trial_envelopes.push_back(TrialEnvelope{rid, &person, reply.body});
    report.trials.push_back(std::move(trial));
  }

  // --- adversary extras -----------------------------------------------------
  if (sc.adversary.kind == AdversarySpec::Kind::replayer) {
    // Re-deliver every request envelope. The provider must answer from its
    // reply cache with the original bytes and execute nothing twice.
    std::size_t journal_before = sp.journal().entries().size();
    bool all_cached = true;
    for (const auto& env : trial_envelopes) {
      WireReply replayed =
          fim ? wallet.initiate_fim(idp_id, sp_id, env.request_id, sc.dsr,
                                    Scope::everything(),
                                    "h-" + env.person->id)
              : wallet.initiate_ssi(sp_id, env.request_id, sc.dsr,
                                    Scope::everything());
      if (replayed.body != env.reply_body) all_cached = false;
    }
    bool journal_stable = sp.journal().entries().size() == journal_before;
    assert_that("replay-idempotent", all_cached && journal_stable,
                !all_cached
                    ? "replayed request produced different answer bytes"
                    : "journal grew on redelivery");
  }

  std::size_t probe_count = 0;
  if (sc.adversary.kind == AdversarySpec::Kind::probing_sp) {
    // The provider fabricates challenges straight to the wallet, asking for
    // every attribute the registry knows. Containment: the wallet's answer
    // discloses at most what consent grants, exactly as for an honest ask.
    std::vector<AttributeType> everything;
    for (const auto& id : registry.ids()) everything.push_back(registry.get(id));
    bool contained = true;
    std::string detail;
    for (std::size_t j = 0; j < sc.adversary.probes; ++j) {
      const SynthPerson& target = population[j % population.size()];
      if (!fim) wallet.acquire_bundle(issuer_id, target.id, {});
      CredentialRequest probe;
      probe.nonce = gen.bytes<16>();
      probe.requested = everything;
      probe.mode = sc.mode;
      probe.sp_id = sp_id;
      Envelope env{"probe-" + std::to_string(j), ProtocolMessage{probe}};
      WireReply reply = net->call(
          sp_id, wallet_id,
          {"POST", "/credential-request",
           canonical_dump(envelope_to_json(env))});
      ++probe_count;
      if (reply.status != 200) continue;  // wallet aborted: nothing leaked
      Json body = Json::parse(reply.body);
      if (body["type"] != "credential_response") continue;
      ProtocolMessage msg = message_from_json(body, registry);
      const auto& resp = std::get<CredentialResponse>(msg);
      for (const auto& slot : resp.presentation.slots) {
        if (!slot.disclosed) continue;
        bool allowed =
            consent_script.kind == ConsentScript::Kind::approve_all ||
            (consent_script.kind == ConsentScript::Kind::approve_listed &&
             consent_script.listed.count(slot.attr.id) > 0);
        if (!allowed) {
          contained = false;
          detail = "probe " + std::to_string(j) + " disclosed " + slot.attr.id;
        }
        if (sc.mode == DisclosureMode::hashed && slot.value.has_value()) {
          contained = false;
          detail = "probe " + std::to_string(j) + " leaked plaintext " +
                   slot.attr.id;
        }
      }
    }
    assert_that("probe-containment", contained, detail);
  }

  if (sc.adversary.kind == AdversarySpec::Kind::malicious_idp_probe) {
    // The identity provider fabricates mediated requests for handles it
    // holds, without any wallet involvement. Prevention is out of scope by
    // design; the property is detectability: every probe, accepted or not,
    // must surface as a device notification the holder can see.
    for (std::size_t j = 0; j < sc.adversary.probes; ++j) {
      const SynthPerson& target = population[j % population.size()];
      DsrRequest forged;
      forged.dsr_type = sc.dsr;
      forged.scope = Scope::everything();
      forged.flow = Flow::fim;
      forged.ds_handle = "h-" + target.id;
      Envelope env{"probe-" + std::to_string(j), ProtocolMessage{forged}};
      WireReply reply =
          net->call(idp_id, sp_id,
                    {"POST", "/dsr", canonical_dump(envelope_to_json(env))});
      ++probe_count;
      ParsedResult res = parse_dsr_result(reply);
      if (res.is_result && res.accepted) ++report.privacy_violations;
    }
    std::set<std::string> notified_ids;
    for (const auto& n : wallet.notifications())
      if (n.contains("request_id"))
        notified_ids.insert(n["request_id"].get<std::string>());
    bool all_visible = true;
    for (std::size_t j = 0; j < sc.adversary.probes; ++j)
      if (!notified_ids.count("probe-" + std::to_string(j)))
        all_visible = false;
    assert_that("probe-detectability", all_visible,
                "a fabricated mediated request produced no device "
                "notification");
  }

  // --- invariants -----------------------------------------------------------
  assert_that("decline-uniformity", decline_bodies.size() <= 1,
              std::to_string(decline_bodies.size()) +
                  " distinct decline encodings observed");

  report.notifications_sent = idp.notifications_sent();
  report.notifications_expected =
      fim ? static_cast<std::uint64_t>(
                trials +
                (sc.adversary.kind == AdversarySpec::Kind::malicious_idp_probe
                     ? sc.adversary.probes
                     : 0))
          : 0;
  if (fim) {
    bool audit_ok =
        report.notifications_sent == report.notifications_expected &&
        wallet.notifications().size() == report.notifications_expected;
    assert_that("notification-audit", audit_ok,
                std::to_string(report.notifications_sent) + " sent vs " +
                    std::to_string(report.notifications_expected) +
                    " expected");
  }

  if (desk_scale)
    assert_that("oracle-agreement", report.oracle_disagreements == 0,
                std::to_string(report.oracle_disagreements) +
                    " verdicts differ from the reference matcher");

  // Privacy scan over the transcript: nothing that identifies the wallet or
  // exceeds granted disclosure may pass the provider's boundary.
  {
    std::vector<std::string> forbidden;
    for (const auto& b : wallet.bundles())
      forbidden.push_back(b64url(b.bundle_id));
    std::size_t hits = 0;
    for (const auto& line : transcript) {
      Json e = Json::parse(line);
      if (e["from"] != sp_id && e["to"] != sp_id) continue;
      const std::string blob = e["request"].get<std::string>() +
                               e["reply"].get<std::string>();
      for (const auto& f : forbidden)
        if (blob.find(f) != std::string::npos) ++hits;
      if (!fim && blob.find("ds_handle") != std::string::npos) ++hits;
      if (sc.mode == DisclosureMode::hashed) {
        // No plaintext the provider did not already hold may reach it.
        for (const auto& p : population)
          for (const auto& [attr, value] : p.canonical)
            if (!prov.held_canonicals.count(value) &&
                value.size() >= 4 &&
                blob.find("\"" + value + "\"") != std::string::npos)
              ++hits;
      }
    }
    report.privacy_violations += hits;
    assert_that("boundary-hygiene", hits == 0,
                std::to_string(hits) + " identifying byte sequences crossed "
                "the provider boundary");
  }

  // Scenario-declared expectations.
  auto expect_eq = [&](const char* what,
                       const std::optional<std::int64_t>& want,
                       std::uint64_t got) {
    if (!want) return;
    assert_that(std::string("expect-") + what,
                static_cast<std::int64_t>(got) == *want,
                std::string(what) + " = " + std::to_string(got) + ", want " +
                    std::to_string(*want));
  };
  expect_eq("accepts", sc.expect.accepts, report.accepts);
  expect_eq("declines", sc.expect.declines, report.declines);
  expect_eq("false-accepts", sc.expect.false_accepts, report.false_accepts);
  expect_eq("false-rejects", sc.expect.false_rejects, report.false_rejects);
  expect_eq("privacy-violations", sc.expect.privacy_violations,
            report.privacy_violations);

  // --- outputs ---------------------------------------------------------------
  std::filesystem::create_directories(out_dir);
  report.transcript_path =
      out_dir + "/" + sc.name + "." +
      std::string(transport_kind_name(transport)) + ".jsonl";
  {
    std::ofstream out(report.transcript_path, std::ios::binary);
    for (const auto& line : transcript) out << line << "\n";
    for (const auto& a : report.assertions)
      out << canonical_dump(Json{{"kind", "assertion"},
                                 {"name", a.name},
                                 {"ok", a.ok},
                                 {"detail", a.detail}})
          << "\n";
  }
  report.report_path = out_dir + "/" + sc.name + "." +
                       std::string(transport_kind_name(transport)) +
                       ".report.json";
  {
    std::ofstream out(report.report_path, std::ios::binary);
    out << canonical_dump(report.to_json()) << "\n";
  }

  for (auto& server : servers) server->stop();

  if (throw_on_assertion && report.assertions_failed() > 0) {
    std::string names;
    for (const auto& a : report.assertions)
      if (!a.ok) names += (names.empty() ? "" : ", ") + a.name;
    throw AssertionFailure("scenario '" + sc.name + "' failed: " + names);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Transcript summaries
// ---------------------------------------------------------------------------

/// Digest of a previously written transcript: message counts by path, the
/// verdict tally, and the embedded assertion results.
inline Json transcript_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureMissing("transcript '" + path + "' not found");
  Json by_path = Json::object();
  std::uint64_t events = 0, accepts = 0, declines = 0;
  std::uint64_t assertions = 0, failed = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json e;
    try {
      e = Json::parse(line);
    } catch (const Json::exception&) {
      throw CorruptState("transcript line is not JSON: " + line.substr(0, 60));
    }
    if (e.contains("kind") && e["kind"] == "assertion") {
      ++assertions;
      if (!e["ok"].get<bool>()) ++failed;
      continue;
    }
    ++events;
    std::string key = e["method"].get<std::string>() + " " +
                      e["path"].get<std::string>();
    by_path[key] = (by_path.contains(key) ? by_path[key].get<int>() : 0) + 1;
    harness_detail::ParsedResult res = harness_detail::parse_dsr_result(
        WireReply{e["status"].get<int>(), e["reply"].get<std::string>()});
    if (res.is_result) (res.accepted ? accepts : declines)++;
  }
  return Json{{"events", events},
              {"by_endpoint", by_path},
              {"results", Json{{"accepted", accepts}, {"declined", declines}}},
              {"assertions", Json{{"total", assertions}, {"failed", failed}}}};
}

}  // namespace dsra
