// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dsra/actors.hpp"
#include "dsra/httpnet.hpp"

using namespace dsra;

namespace {

Json parsed(const WireReply& reply) { return Json::parse(reply.body); }

std::map<std::string, std::map<AttributeId, std::string>> demo_persons() {
  return {
      {"p-erika",
       {{"pid.given_name", "Erika"},
        {"pid.family_name", "Mustermann"},
        {"pid.birth_date", "12.08.1964"},
        {"pid.unique_id", "DE-0001"},
        {"pid.address", "Heidestraße 17, 51147 Köln"}}},
      {"p-max",
       {{"pid.given_name", "Max"},
        {"pid.family_name", "Meier"},
        {"pid.birth_date", "1990-02-01"},
        {"pid.unique_id", "DE-0002"}}},
  };
}

Store demo_store() {
  AttributeRegistry registry = AttributeRegistry::with_defaults();
  Store store(registry);
  DataSet crm;
  crm.dataset_id = "crm";
  auto record = [&](const std::string& rid,
                    std::vector<std::pair<std::string, std::string>> values) {
    DataRecord r;
    r.record_id = rid;
    for (auto& [id, raw] : values) {
      DataField f;
      f.attr = registry.get(id);
      f.label = id;
      f.raw = raw;
      f.canonical = canonicalize(*f.attr, raw).text;
      f.derived = id.rfind("derived.", 0) == 0;
      r.fields.push_back(std::move(f));
    }
    return r;
  };
  crm.records.push_back(record("cust-1", {{"pid.given_name", "Erika"},
                                          {"pid.family_name", "MUSTERMANN"},
                                          {"pid.birth_date", "1964-08-12"}}));
  crm.records.push_back(record("cust-2", {{"pid.given_name", "Max"},
                                          {"pid.family_name", "Meier"},
                                          {"pid.birth_date", "01.02.1990"}}));
  store.add_dataset(std::move(crm));
  return store;
}

/// A full four-actor constellation on one transport, with a shared pinned
/// clock. Every test builds a fresh one.
struct World {
  std::shared_ptr<FixedClock> clock =
      std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  SeededRng keyrng{11};
  KeyPair issuer_key = ed25519::keygen(keyrng);
  InProcessTransport net;
  IssuerActor issuer;
  IdpActor idp;
  SpActor sp;
  WalletActor wallet;

  explicit World(DisclosureMode mode = DisclosureMode::cleartext,
                 std::string consent = "approve_all")
      : issuer("issuer.example", demo_persons(), issuer_key.secret,
               AttributeRegistry::with_defaults(), clock, 21),
        idp("idp.example", issuer_key.public_key,
            AttributeRegistry::with_defaults(), clock),
        sp("sp.example", demo_store(), MatchPolicy{}, mode, clock, 31),
        wallet("wallet-1", ConsentScript::parse(consent), clock) {
    for (Actor* a : std::initializer_list<Actor*>{&issuer, &idp, &sp, &wallet})
      net.attach(*a);
    idp.wire(&net, "issuer.example");
    sp.wire(&net, "idp.example");
    wallet.wire(&net);
  }

  const CredentialBundle& issue_to_wallet(const std::string& person) {
    return wallet.acquire_bundle("issuer.example", person, {});
  }
};

std::string opaque_decline_body() {
  return canonical_dump(message_to_json(
      ProtocolMessage{DsrResult{DsrResultStatus::declined, std::nullopt}}));
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("dsra_actors_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST_CASE("actor config parses the documented key-value format", "[actors]") {
  ActorConfig cfg = parse_actor_config(
      "# service provider\n"
      "kind = sp\n"
      "id = sp.example\n"
      "listen = 127.0.0.1:7102\n"
      "store = fixtures/store.json\n"
      "policy = fixtures/policy.json\n"
      "mode = hashed\n"
      "idp_peer = idp.example\n"
      "clock = fixed:2026-08-19T12:00:00Z\n"
      "seed = 42\n"
      "peer.idp.example = http://127.0.0.1:7101\n"
      "peer.wallet-1 = http://127.0.0.1:7103\n");
  CHECK(cfg.kind == "sp");
  CHECK(cfg.id == "sp.example");
  CHECK(cfg.listen == "127.0.0.1:7102");
  CHECK(cfg.mode == "hashed");
  CHECK(cfg.seed == 42);
  CHECK(cfg.peers.at("wallet-1") == "http://127.0.0.1:7103");

  CHECK_THROWS_AS(parse_actor_config("kind = sp\nid = x\nbogus = 1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_actor_config("kind = dj\nid = x\n"), ConfigError);
  CHECK_THROWS_AS(parse_actor_config("kind = sp\n"), ConfigError);
  CHECK_THROWS_AS(parse_actor_config("kind sp\n"), ConfigError);
}

TEST_CASE("environment variables override listen and clock", "[actors]") {
  TempDir dir;
  std::ofstream(dir.path / "a.conf")
      << "kind = wallet\nid = w1\nlisten = 127.0.0.1:1\nclock = real\n";
  ::setenv("DSRA_LISTEN", "127.0.0.1:9999", 1);
  ::setenv("DSRA_CLOCK", "fixed:2026-01-01T00:00:00Z", 1);
  ActorConfig cfg = load_actor_config((dir.path / "a.conf").string());
  ::unsetenv("DSRA_LISTEN");
  ::unsetenv("DSRA_CLOCK");
  CHECK(cfg.listen == "127.0.0.1:9999");
  CHECK(cfg.clock == "fixed:2026-01-01T00:00:00Z");
}

TEST_CASE("clock specs parse", "[actors]") {
  CHECK(make_clock("fixed:2026-08-19T12:00:00Z")->now() ==
        UtcTime::from_iso("2026-08-19T12:00:00Z"));
  CHECK_NOTHROW(make_clock("real"));
  CHECK_THROWS_AS(make_clock("sundial"), ConfigError);
}

// ---------------------------------------------------------------------------
// Issuer endpoints
// ---------------------------------------------------------------------------

TEST_CASE("issuer issues, revokes, and answers validity questions",
          "[actors]") {
  World w;
  WireReply issued = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/issue",
       canonical_dump(Json{{"person_id", "p-erika"}, {"valid_days", 30}})});
  REQUIRE(issued.status == 200);
  CredentialBundle bundle = bundle_from_json(parsed(issued));
  CHECK(bundle.issuer_id == "issuer.example");
  CHECK(bundle.attributes.size() == 5);  // every attribute the person has

  std::string validity_path = "/validity/" + b64url(bundle.bundle_id);
  WireReply validity =
      w.net.call("idp.example", "issuer.example", {"GET", validity_path, ""});
  CHECK(parsed(validity)["status"] == "valid");

  WireReply by_fp = w.net.call(
      "idp.example", "issuer.example",
      {"GET", "/validity/by-fingerprint/" + b64url(bundle_fingerprint(bundle)),
       ""});
  CHECK(parsed(by_fp)["status"] == "valid");

  Json revoke_body{{"bundle_id", b64url(bundle.bundle_id)}};
  WireReply revoked = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/revoke", canonical_dump(revoke_body)});
  CHECK(revoked.status == 200);
  WireReply again = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/revoke", canonical_dump(revoke_body)});
  CHECK(again.status == 200);  // idempotent

  validity =
      w.net.call("idp.example", "issuer.example", {"GET", validity_path, ""});
  CHECK(parsed(validity)["status"] == "expired");

  WireReply unknown_person = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/issue", canonical_dump(Json{{"person_id", "p-nobody"}})});
  CHECK(unknown_person.status == 404);
  CHECK(parsed(unknown_person)["error"] == "unknown_person");

  WireReply unknown_bundle = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/revoke",
       canonical_dump(Json{{"bundle_id", b64url(Nonce16{})}})});
  CHECK(unknown_bundle.status == 404);

  WireReply unknown_validity = w.net.call(
      "idp.example", "issuer.example",
      {"GET", "/validity/" + b64url(Nonce16{}), ""});
  CHECK(parsed(unknown_validity)["status"] == "unknown");

  // Two issuances for one person: both tracked, both valid.
  WireReply second = w.net.call(
      "wallet-1", "issuer.example",
      {"POST", "/issue", canonical_dump(Json{{"person_id", "p-erika"}})});
  CredentialBundle other = bundle_from_json(parsed(second));
  CHECK(other.bundle_id != bundle.bundle_id);
  CHECK(w.issuer.ledger().check_expiration(other.bundle_id, w.clock->now())
            .status == ExpirationStatus::valid);
}

// ---------------------------------------------------------------------------
// Wallet flow end to end (in-process)
// ---------------------------------------------------------------------------

TEST_CASE("an access request by the data owner is fulfilled", "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  WireReply reply = w.wallet.initiate_ssi("sp.example", "req-1",
                                          DsrType::access, Scope::everything());
  REQUIRE(reply.status == 200);
  Json result = parsed(reply);
  CHECK(result["type"] == "dsr_result");
  CHECK(result["status"] == "fulfilled");
  REQUIRE(result["payload"]["records"].size() == 1);
  CHECK(result["payload"]["records"][0]["record_id"] == "cust-1");

  REQUIRE(w.sp.journal().entries().size() == 1);
  CHECK(w.sp.journal().entries()[0].fulfilled);
  CHECK(w.sp.journal().entries()[0].deadline ==
        w.clock->now().plus_days(30));
}

TEST_CASE("an erasure request deletes exactly the matched records",
          "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  WireReply reply = w.wallet.initiate_ssi(
      "sp.example", "req-1", DsrType::erasure, Scope::everything());
  Json result = parsed(reply);
  CHECK(result["status"] == "fulfilled");
  CHECK(result["payload"]["erased"] == 1);
  CHECK(w.sp.store().record_count() == 1);  // cust-2 stays
}

TEST_CASE("redelivered requests get the cached reply and execute once",
          "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  WireReply first = w.wallet.initiate_ssi(
      "sp.example", "req-dup", DsrType::erasure, Scope::everything());
  WireReply second = w.wallet.initiate_ssi(
      "sp.example", "req-dup", DsrType::erasure, Scope::everything());
  CHECK(first.body == second.body);
  CHECK(first.status == second.status);
  CHECK(w.sp.store().record_count() == 1);
  CHECK(w.sp.journal().entries().size() == 1);
}

TEST_CASE("every provider-visible decline is one byte string", "[actors]") {
  std::set<std::string> bodies;
  auto run = [&](World& w, const std::string& request_id) {
    WireReply reply = w.wallet.initiate_ssi(
        "sp.example", request_id, DsrType::access, Scope::everything());
    REQUIRE(reply.status == 200);
    bodies.insert(reply.body);
  };

  {  // cause: nothing in the store matches this subject
    World w;
    w.issue_to_wallet("p-max");
    w.sp.store().erase_records({{"crm", "cust-2"}});  // drop Max's record
    run(w, "req-nomatch");
  }
  {  // cause: revoked bundle (verifier says expired)
    World w;
    const CredentialBundle& b = w.issue_to_wallet("p-erika");
    w.issuer.ledger().revoke(b.bundle_id, w.clock->now());
    run(w, "req-revoked");
  }
  {  // cause: consent refused
    World w(DisclosureMode::cleartext, "deny_all");
    w.issue_to_wallet("p-erika");
    run(w, "req-denied");
  }
  {  // cause: consent timed out
    World w(DisclosureMode::cleartext, "timeout");
    w.issue_to_wallet("p-erika");
    run(w, "req-timeout");
  }
  {  // cause: expired bundle at presentation time
    World w;
    w.issue_to_wallet("p-erika");
    w.clock->advance_days(400);
    run(w, "req-expired");
  }
  {  // cause: scope names a data set that does not exist
    World w;
    w.issue_to_wallet("p-erika");
    WireReply reply = w.wallet.initiate_ssi(
        "sp.example", "req-badscope", DsrType::access,
        Scope::of_datasets({"no-such-set"}));
    REQUIRE(reply.status == 200);
    bodies.insert(reply.body);
  }
  {  // cause: mediated flow below threshold
    World w;
    w.issue_to_wallet("p-max");
    w.wallet.register_at_idp("idp.example", "handle-max");
    Store& s = w.sp.store();
    s.erase_records({{"crm", "cust-2"}});
    WireReply reply = w.wallet.initiate_fim(
        "idp.example", "sp.example", "req-fim-decl", DsrType::access,
        Scope::everything(), "handle-max");
    REQUIRE(reply.status == 200);
    bodies.insert(reply.body);
  }

  CHECK(bodies.size() == 1);
  CHECK(*bodies.begin() == opaque_decline_body());
}

TEST_CASE("hashed mode works end to end", "[actors]") {
  World w(DisclosureMode::hashed);
  w.issue_to_wallet("p-erika");
  WireReply reply = w.wallet.initiate_ssi("sp.example", "req-1",
                                          DsrType::access, Scope::everything());
  Json result = parsed(reply);
  CHECK(result["status"] == "fulfilled");
  CHECK(result["payload"]["records"].size() == 1);
}

TEST_CASE("partial consent still authenticates when enough matches remain",
          "[actors]") {
  World w(DisclosureMode::cleartext,
          "approve:pid.given_name,pid.family_name,pid.birth_date");
  w.issue_to_wallet("p-erika");
  Json result = parsed(w.wallet.initiate_ssi(
      "sp.example", "req-1", DsrType::access, Scope::everything()));
  CHECK(result["status"] == "fulfilled");

  World w2(DisclosureMode::cleartext, "approve:pid.given_name");
  w2.issue_to_wallet("p-erika");
  Json declined = parsed(w2.wallet.initiate_ssi(
      "sp.example", "req-2", DsrType::access, Scope::everything()));
  CHECK(declined["status"] == "declined");  // one attribute scores below 3
}

// ---------------------------------------------------------------------------
// Mediated flow end to end (in-process)
// ---------------------------------------------------------------------------

TEST_CASE("the mediated flow fulfills and notifies the device", "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  w.wallet.register_at_idp("idp.example", "handle-erika");

  WireReply reply = w.wallet.initiate_fim(
      "idp.example", "sp.example", "req-fim", DsrType::access,
      Scope::everything(), "handle-erika");
  REQUIRE(reply.status == 200);
  Json result = parsed(reply);
  CHECK(result["status"] == "fulfilled");
  // The identity provider only vouches; execution covers the scoped records.
  CHECK(result["payload"]["records"].size() == 2);

  REQUIRE(w.wallet.notifications().size() == 1);
  const Json& note = w.wallet.notifications()[0];
  CHECK(note["sp_id"] == "sp.example");
  CHECK(note["request_id"] == "req-fim");
  CHECK(w.idp.notifications_sent() == 1);
}

TEST_CASE("a declined mediated request still notifies the device",
          "[actors]") {
  World w;
  const CredentialBundle& bundle = w.issue_to_wallet("p-erika");
  w.wallet.register_at_idp("idp.example", "handle-erika");
  w.issuer.ledger().revoke(bundle.bundle_id, w.clock->now());

  Json result = parsed(w.wallet.initiate_fim(
      "idp.example", "sp.example", "req-fim", DsrType::access,
      Scope::everything(), "handle-erika"));
  CHECK(result["status"] == "declined");
  CHECK(w.wallet.notifications().size() == 1);
}

TEST_CASE("initiation with an unregistered handle fails at the identity "
          "provider",
          "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  WireReply reply = w.wallet.initiate_fim(
      "idp.example", "sp.example", "req-fim", DsrType::access,
      Scope::everything(), "handle-ghost");
  CHECK(reply.status == 400);
  CHECK(parsed(reply)["error"] == "unknown_handle");
  CHECK(w.wallet.notifications().empty());
  CHECK(w.sp.journal().entries().empty());  // never reached the provider
}

TEST_CASE("registration demands a genuine, currently valid bundle",
          "[actors]") {
  World w;
  const CredentialBundle& bundle = w.issue_to_wallet("p-erika");

  SECTION("tampered bundle is rejected") {
    CredentialBundle forged = bundle;
    forged.valid_until = forged.valid_until.plus_days(3650);
    Json body{{"ds_handle", "h"},
              {"bundle", bundle_to_json(forged)},
              {"notify_peer", "wallet-1"}};
    WireReply reply = w.net.call("wallet-1", "idp.example",
                                 {"POST", "/register", canonical_dump(body)});
    CHECK(reply.status == 400);
    CHECK(parsed(reply)["error"] == "invalid_bundle");
  }
  SECTION("revoked bundle is rejected") {
    w.issuer.ledger().revoke(bundle.bundle_id, w.clock->now());
    Json body{{"ds_handle", "h"},
              {"bundle", bundle_to_json(bundle)},
              {"notify_peer", "wallet-1"}};
    WireReply reply = w.net.call("wallet-1", "idp.example",
                                 {"POST", "/register", canonical_dump(body)});
    CHECK(reply.status == 400);
    CHECK(parsed(reply)["error"] == "expired");
  }
  SECTION("valid bundle registers") {
    CHECK_NOTHROW(w.wallet.register_at_idp("idp.example", "handle-erika"));
  }
}

TEST_CASE("the audit log counts exactly the processed verification requests",
          "[actors]") {
  World w;
  w.issue_to_wallet("p-erika");
  w.wallet.register_at_idp("idp.example", "handle-erika");
  size_t registrations = w.idp.audit_log().size();  // /register audits too
  CHECK(registrations == 1);

  w.wallet.initiate_ssi("sp.example", "r1", DsrType::access,
                        Scope::everything());  // 1 verify
  w.wallet.initiate_fim("idp.example", "sp.example", "r2", DsrType::access,
                        Scope::everything(), "handle-erika");  // 1 fim_verify

  World w2(DisclosureMode::cleartext, "deny_all");
  w2.issue_to_wallet("p-erika");
  w2.wallet.initiate_ssi("sp.example", "r3", DsrType::access,
                         Scope::everything());  // aborts before the verifier
  CHECK(w2.idp.audit_log().empty());

  CHECK(w.idp.audit_log().size() - registrations == 2);
}

// ---------------------------------------------------------------------------
// Combined issuer + identity provider
// ---------------------------------------------------------------------------

TEST_CASE("one process can play issuer and identity provider at once",
          "[actors]") {
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  SeededRng keyrng{11};
  KeyPair key = ed25519::keygen(keyrng);
  InProcessTransport net;
  CombinedIssuerIdpActor both("home.example", demo_persons(), key.secret,
                              AttributeRegistry::with_defaults(), clock, 21);
  SpActor sp("sp.example", demo_store(), MatchPolicy{},
             DisclosureMode::cleartext, clock, 31);
  WalletActor wallet("wallet-1", ConsentScript::parse("approve_all"), clock);
  net.attach(both);
  net.attach(sp);
  net.attach(wallet);
  both.wire(&net);
  sp.wire(&net, "home.example");
  wallet.wire(&net);

  wallet.acquire_bundle("home.example", "p-erika", {});
  wallet.register_at_idp("home.example", "handle-erika");

  Json ssi = parsed(wallet.initiate_ssi("sp.example", "r1", DsrType::access,
                                        Scope::everything()));
  CHECK(ssi["status"] == "fulfilled");
  Json fim = parsed(wallet.initiate_fim("home.example", "sp.example", "r2",
                                        DsrType::access, Scope::everything(),
                                        "handle-erika"));
  CHECK(fim["status"] == "fulfilled");
  CHECK(wallet.notifications().size() == 1);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

TEST_CASE("provider state survives a restart", "[actors]") {
  TempDir dir;
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  {
    World w;
    SpActor sp("sp.example", demo_store(), MatchPolicy{},
               DisclosureMode::cleartext, clock, 31, dir.path.string());
    w.net.attach(sp);  // shadows the world's own sp for this request
    sp.wire(&w.net, "idp.example");
    w.issue_to_wallet("p-erika");
    Json result = parsed(w.wallet.initiate_ssi(
        "sp.example", "req-1", DsrType::erasure, Scope::everything()));
    REQUIRE(result["status"] == "fulfilled");
    REQUIRE(sp.store().record_count() == 1);
    sp.persist();
  }
  SpActor restored("sp.example", demo_store(), MatchPolicy{},
                   DisclosureMode::cleartext, clock, 31, dir.path.string());
  CHECK(restored.store().record_count() == 1);  // the erasure persisted
  REQUIRE(restored.journal().entries().size() == 1);
  CHECK(restored.journal().entries()[0].fulfilled);
  CHECK(std::filesystem::exists(dir.path / "sp.example.sp.journal.jsonl"));
}

TEST_CASE("issuer ledger state survives a restart", "[actors]") {
  TempDir dir;
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  SeededRng keyrng{11};
  KeyPair key = ed25519::keygen(keyrng);
  BundleId revoked_id;
  {
    IssuerActor issuer("issuer.example", demo_persons(), key.secret,
                       AttributeRegistry::with_defaults(), clock, 21,
                       dir.path.string());
    WireReply issued = issuer.handle(
        {"POST", "/issue", canonical_dump(Json{{"person_id", "p-erika"}})});
    revoked_id = bundle_from_json(Json::parse(issued.body)).bundle_id;
    issuer.handle({"POST", "/revoke",
                   canonical_dump(Json{{"bundle_id", b64url(revoked_id)}})});
    issuer.persist();
  }
  IssuerActor restored("issuer.example", demo_persons(), key.secret,
                       AttributeRegistry::with_defaults(), clock, 21,
                       dir.path.string());
  CHECK(restored.ledger().check_expiration(revoked_id, clock->now()).status ==
        ExpirationStatus::expired);
}

TEST_CASE("a corrupt snapshot refuses to serve", "[actors]") {
  TempDir dir;
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  std::ofstream(dir.path / "sp.example.sp.state.json") << "{not json";
  CHECK_THROWS_AS(SpActor("sp.example", demo_store(), MatchPolicy{},
                          DisclosureMode::cleartext, clock, 31,
                          dir.path.string()),
                  CorruptState);

  std::ofstream(dir.path / "w.wallet.state.json",
                std::ios::trunc) << "{\"bundles\": 7}";
  CHECK_THROWS_AS(WalletActor("w", ConsentScript::parse("approve_all"), clock,
                              dir.path.string()),
                  CorruptState);
}

// ---------------------------------------------------------------------------
// HTTP front end
// ---------------------------------------------------------------------------

TEST_CASE("the http front end carries the same bytes as in-process calls",
          "[actors]") {
  // In-process run.
  World reference;
  reference.issue_to_wallet("p-erika");
  WireReply expected = reference.wallet.initiate_ssi(
      "sp.example", "req-http", DsrType::access, Scope::everything());

  // Same constellation, HTTP transport, fresh state.
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  SeededRng keyrng{11};
  KeyPair key = ed25519::keygen(keyrng);
  IssuerActor issuer("issuer.example", demo_persons(), key.secret,
                     AttributeRegistry::with_defaults(), clock, 21);
  IdpActor idp("idp.example", key.public_key,
               AttributeRegistry::with_defaults(), clock);
  SpActor sp("sp.example", demo_store(), MatchPolicy{},
             DisclosureMode::cleartext, clock, 31);
  WalletActor wallet("wallet-1", ConsentScript::parse("approve_all"), clock);

  HttpTransport net;
  ActorServer issuer_srv, idp_srv, sp_srv, wallet_srv;
  issuer_srv.start(issuer, "127.0.0.1:0");
  idp_srv.start(idp, "127.0.0.1:0");
  sp_srv.start(sp, "127.0.0.1:0");
  wallet_srv.start(wallet, "127.0.0.1:0");
  net.add_peer("issuer.example", issuer_srv.url());
  net.add_peer("idp.example", idp_srv.url());
  net.add_peer("sp.example", sp_srv.url());
  net.add_peer("wallet-1", wallet_srv.url());
  idp.wire(&net, "issuer.example");
  sp.wire(&net, "idp.example");
  wallet.wire(&net);

  wallet.acquire_bundle("issuer.example", "p-erika", {});
  WireReply actual = wallet.initiate_ssi("sp.example", "req-http",
                                         DsrType::access, Scope::everything());
  CHECK(actual.status == expected.status);
  CHECK(actual.body == expected.body);

  // Mediated flow over HTTP, notification included.
  wallet.register_at_idp("idp.example", "handle-erika");
  Json fim = parsed(wallet.initiate_fim("idp.example", "sp.example", "req-f",
                                        DsrType::access, Scope::everything(),
                                        "handle-erika"));
  CHECK(fim["status"] == "fulfilled");
  CHECK(wallet.notifications().size() == 1);
}

TEST_CASE("binding an occupied port is a bind failure", "[actors]") {
  auto clock = std::make_shared<FixedClock>("2026-08-19T12:00:00Z");
  WalletActor wallet("w1", ConsentScript::parse("approve_all"), clock);
  WalletActor other("w2", ConsentScript::parse("approve_all"), clock);
  ActorServer first;
  first.start(wallet, "127.0.0.1:0");
  ActorServer second;
  CHECK_THROWS_AS(
      second.start(other, "127.0.0.1:" + std::to_string(first.port())),
      BindFailure);
}

// ---------------------------------------------------------------------------
// Hygiene
// ---------------------------------------------------------------------------

TEST_CASE("the issuer's signing seed never leaves the process", "[actors]") {
  std::vector<std::string> observed;
  World w;
  w.net.set_tap([&](const WireEvent& e) {
    observed.push_back(e.request.body);
    observed.push_back(e.reply.body);
  });
  w.issue_to_wallet("p-erika");
  w.wallet.register_at_idp("idp.example", "handle-erika");
  w.wallet.initiate_ssi("sp.example", "r1", DsrType::access,
                        Scope::everything());
  w.wallet.initiate_fim("idp.example", "sp.example", "r2", DsrType::access,
                        Scope::everything(), "handle-erika");

  std::string secret_b64 = b64url(w.issuer_key.secret);
  REQUIRE(observed.size() > 8);
  for (const auto& body : observed)
    CHECK(body.find(secret_b64) == std::string::npos);
}

TEST_CASE("factory builds each kind from fixture files", "[actors]") {
  TempDir dir;
  SeededRng keyrng{11};
  KeyPair key = ed25519::keygen(keyrng);
  std::ofstream(dir.path / "issuer.key") << b64url(key.secret) << "\n";
  std::ofstream(dir.path / "issuer.pub") << b64url(key.public_key) << "\n";
  std::ofstream(dir.path / "persons.json") << canonical_dump(Json{
      {"persons",
       Json{{"p-1", Json{{"pid.given_name", "Ada"},
                         {"pid.family_name", "Lovelace"},
                         {"pid.birth_date", "1815-12-10"},
                         {"pid.unique_id", "UK-0001"}}}}}});
  Json datasets = Json::array();
  datasets.push_back(dataset_to_json(*demo_store().dataset("crm")));
  std::ofstream(dir.path / "store.json")
      << canonical_dump(Json{{"datasets", datasets}});
  std::ofstream(dir.path / "policy.json")
      << canonical_dump(Json{{"base_threshold", "2/1"}});

  InProcessTransport net;
  auto base = [&](const std::string& extra) {
    return parse_actor_config("clock = fixed:2026-08-19T12:00:00Z\n" + extra);
  };
  auto issuer = make_actor(
      base("kind = issuer\nid = i\nregistry = " +
           (dir.path / "persons.json").string() + "\nkey = " +
           (dir.path / "issuer.key").string() + "\n"),
      &net);
  auto idp = make_actor(base("kind = idp\nid = v\ntrust = " +
                             (dir.path / "issuer.pub").string() +
                             "\nissuer_peer = i\n"),
                        &net);
  auto sp = make_actor(
      base("kind = sp\nid = s\nstore = " + (dir.path / "store.json").string() +
           "\npolicy = " + (dir.path / "policy.json").string() +
           "\nidp_peer = v\n"),
      &net);
  auto wallet = make_actor(base("kind = wallet\nid = w\n"), &net);
  auto combined = make_actor(
      base("kind = issuer+idp\nid = both\nregistry = " +
           (dir.path / "persons.json").string() + "\nkey = " +
           (dir.path / "issuer.key").string() + "\n"),
      &net);
  for (auto* a : {&issuer, &idp, &sp, &wallet, &combined}) net.attach(**a);

  CHECK(parsed(net.call("w", "i", {"GET", "/health", ""}))["status"] == "ok");
  CHECK(parsed(net.call("w", "both", {"GET", "/health", ""}))["actor"] ==
        "both");

  // The loaded policy applies: threshold 2 lets two attributes through.
  auto& w = dynamic_cast<WalletActor&>(*wallet);
  w.acquire_bundle("i", "p-1", {});
  Json result = parsed(w.initiate_ssi("s", "r1", DsrType::access,
                                      Scope::everything()));
  CHECK(result["status"] == "declined");  // Ada matches nothing in the store

  CHECK_THROWS_AS(make_actor(base("kind = sp\nid = s\n"), &net), ConfigError);
  CHECK_THROWS_AS(make_actor(base("kind = idp\nid = v\n"), &net), ConfigError);
}
