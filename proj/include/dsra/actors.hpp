// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// Long-running services wrapping the protocol handlers: Issuer, Identity
// Provider, Service Provider, and Wallet. Each actor is a deterministic
// request handler behind a tiny wire interface (method, path, body) that both
// the in-process transport and the HTTP front end speak, so the bytes an
// actor emits are identical no matter how they travel. Actors read time only
// through an injected clock and randomness only through a seeded generator;
// with both pinned, a whole multi-actor run is reproducible byte for byte.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/credentials.hpp"
#include "dsra/datastore.hpp"
#include "dsra/errors.hpp"
#include "dsra/jsoncanon.hpp"
#include "dsra/policy.hpp"
#include "dsra/protocol.hpp"
#include "dsra/rng.hpp"
#include "dsra/time.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Wire interface
// ---------------------------------------------------------------------------

struct WireRequest {
  std::string method;  // "GET" or "POST"
  std::string path;    // begins with '/'
  std::string body;    // JSON; empty for GET
};

struct WireReply {
  int status = 0;
  std::string body;  // JSON
};

inline WireReply json_reply(int status, const Json& j) {
  return WireReply{status, canonical_dump(j)};
}

inline WireReply error_reply(int status, std::string_view code) {
  return json_reply(status, Json{{"error", std::string(code)}});
}

/// A service: one id, one handler. Handlers are externally synchronized by
/// the actor itself (single writer), so transports may call from any thread.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual const std::string& actor_id() const = 0;
  virtual WireReply handle(const WireRequest& request) = 0;
  /// Flush persistent state (snapshot). No-op for ephemeral actors.
  virtual void persist() {}
};

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

/// One observed exchange. `seq` orders events globally within a transport;
/// nested calls are recorded inside-out (a call is recorded when it returns).
/// Deliberately free of connection metadata -- no addresses, ports, headers,
/// or wall-clock receive times -- so two transports carrying the same flow
/// produce the same event stream.
struct WireEvent {
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  WireRequest request;
  WireReply reply;
};

using WireTap = std::function<void(const WireEvent&)>;

/// Peer directory plus delivery. Actors address each other by actor id only;
/// how an id resolves (object pointer, URL) is the transport's business.
class Transport {
 public:
  virtual ~Transport() = default;

  WireReply call(const std::string& from, const std::string& to,
                 const WireRequest& request) {
    WireReply reply = roundtrip(to, request);
    {
      std::lock_guard<std::mutex> lock(tap_mutex_);
      if (tap_) tap_(WireEvent{seq_++, from, to, request, reply});
    }
    return reply;
  }

  void set_tap(WireTap tap) {
    std::lock_guard<std::mutex> lock(tap_mutex_);
    tap_ = std::move(tap);
    seq_ = 0;
  }

 protected:
  virtual WireReply roundtrip(const std::string& to,
                              const WireRequest& request) = 0;

 private:
  WireTap tap_;
  std::uint64_t seq_ = 0;
  std::mutex tap_mutex_;
};

/// Direct dispatch to actor objects in this process.
class InProcessTransport final : public Transport {
 public:
  void attach(Actor& actor) { actors_[actor.actor_id()] = &actor; }

 protected:
  WireReply roundtrip(const std::string& to,
                      const WireRequest& request) override {
    auto it = actors_.find(to);
    if (it == actors_.end())
      throw ConfigError("unresolvable peer '" + to + "'");
    return it->second->handle(request);
  }

 private:
  std::map<std::string, Actor*> actors_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Key-value actor configuration. Format: one `key = value` per line, `#`
/// comments, blank lines ignored. Keys `peer.<actor_id>` populate the peer
/// directory. Environment variables DSRA_LISTEN and DSRA_CLOCK override the
/// corresponding keys.
struct ActorConfig {
  std::string kind;    // issuer | idp | sp | wallet | issuer+idp
  std::string id;      // actor id, e.g. "sp.example"
  std::string listen;  // host:port for the HTTP front end
  std::map<std::string, std::string> peers;  // actor_id -> URL
  std::string state_dir;

  std::string registry_path;  // issuer: person records fixture (JSON)
  std::string key_path;       // issuer / issuer+idp: signing seed (base64url)
  std::string trust_path;     // idp: trusted issuer public key (base64url)
  std::string store_path;     // sp: datasets fixture (JSON)
  std::string policy_path;    // sp: match policy (JSON)

  std::string clock = "real";  // "real" or "fixed:<iso8601>"
  std::string mode = "cleartext";
  std::string consent = "approve_all";
  std::string issuer_peer;  // idp: where validity questions go
  std::string idp_peer;     // sp: where verification requests go
  std::uint64_t seed = 1;
};

inline ActorConfig parse_actor_config(std::string_view text) {
  ActorConfig cfg;
  size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  auto trim = [](std::string s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key == "kind") cfg.kind = value;
    else if (key == "id") cfg.id = value;
    else if (key == "listen") cfg.listen = value;
    else if (key == "state_dir") cfg.state_dir = value;
    else if (key == "registry") cfg.registry_path = value;
    else if (key == "key") cfg.key_path = value;
    else if (key == "trust") cfg.trust_path = value;
    else if (key == "store") cfg.store_path = value;
    else if (key == "policy") cfg.policy_path = value;
    else if (key == "clock") cfg.clock = value;
    else if (key == "mode") cfg.mode = value;
    else if (key == "consent") cfg.consent = value;
    else if (key == "issuer_peer") cfg.issuer_peer = value;
    else if (key == "idp_peer") cfg.idp_peer = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key.rfind("peer.", 0) == 0) cfg.peers[key.substr(5)] = value;
    else throw ConfigError("config line " + std::to_string(line_no) +
                           ": unknown key '" + key + "'");
  }
  static const std::set<std::string> kKinds{"issuer", "idp", "sp", "wallet",
                                            "issuer+idp"};
  if (!kKinds.count(cfg.kind))
    throw ConfigError("config: kind must be one of issuer, idp, sp, wallet, "
                      "issuer+idp");
  if (cfg.id.empty()) throw ConfigError("config: id is required");
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline ActorConfig load_actor_config(const std::string& path) {
  ActorConfig cfg = parse_actor_config(read_text_file(path));
  if (const char* listen = std::getenv("DSRA_LISTEN")) cfg.listen = listen;
  if (const char* clock = std::getenv("DSRA_CLOCK")) cfg.clock = clock;
  return cfg;
}

inline std::shared_ptr<Clock> make_clock(const std::string& spec) {
  if (spec == "real") return std::make_shared<SystemClock>();
  if (spec.rfind("fixed:", 0) == 0)
    return std::make_shared<FixedClock>(std::string_view(spec).substr(6));
  throw ConfigError("clock must be 'real' or 'fixed:<iso8601>'");
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Snapshot-plus-journal persistence for one actor. The snapshot is the state
/// of record (canonical JSON, written whole on persist()); the journal is an
/// append-only JSON-lines record of every state-changing event, kept for
/// audit and replay. A snapshot that does not parse or does not validate is
/// CorruptState -- the actor must refuse to serve rather than run on guesses.
class StateDir {
 public:
  StateDir(std::string dir, std::string name)
      : dir_(std::move(dir)), name_(std::move(name)) {
    std::filesystem::create_directories(dir_);
  }

  bool has_snapshot() const {
    return std::filesystem::exists(snapshot_path());
  }

  Json load_snapshot() const {
    std::ifstream in(snapshot_path(), std::ios::binary);
    if (!in) throw CorruptState("snapshot unreadable: " + snapshot_path());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      return Json::parse(buf.str());
    } catch (const std::exception& e) {
      throw CorruptState("snapshot is not valid JSON: " + snapshot_path());
    }
  }

  void write_snapshot(const Json& state) const {
    std::string tmp = snapshot_path() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << canonical_dump(state) << '\n';
    }
    std::filesystem::rename(tmp, snapshot_path());
  }

  void append_journal(const Json& event) const {
    std::ofstream out(journal_path(), std::ios::binary | std::ios::app);
    out << canonical_dump(event) << '\n';
  }

  std::string snapshot_path() const { return dir_ + "/" + name_ + ".state.json"; }
  std::string journal_path() const { return dir_ + "/" + name_ + ".journal.jsonl"; }

 private:
  std::string dir_;
  std::string name_;
};

inline Json dsr_entry_to_json(const DSRRequestRecord& e) {
  Json j{{"request_id", e.request_id},
         {"dsr_type", std::string(dsr_type_name(e.dsr_type))},
         {"scope", scope_to_json(e.scope)},
         {"received_at", e.received_at.iso()},
         {"fulfilled", e.fulfilled},
         {"declined", e.declined}};
  if (e.resolved_at) j["resolved_at"] = e.resolved_at->iso();
  return j;
}

// ---------------------------------------------------------------------------
// Issuer
// ---------------------------------------------------------------------------

/// Issues eID bundles from a registry of person records, answers validity
/// questions, and processes revocations. The signing seed never appears in
/// any reply or snapshot; only the ledger of issuances is persistent state.
class IssuerActor final : public Actor {
 public:
  IssuerActor(std::string id,
              std::map<std::string, std::map<AttributeId, std::string>> persons,
              const SecretSeed& secret, AttributeRegistry registry,
              std::shared_ptr<Clock> clock, std::uint64_t seed,
              std::string state_dir = "")
      : id_(std::move(id)),
        persons_(std::move(persons)),
        secret_(secret),
        public_key_(ed25519::public_of(secret)),
        registry_(std::move(registry)),
        clock_(std::move(clock)),
        rng_(seed) {
    if (!state_dir.empty()) {
      state_.emplace(state_dir, id_ + ".issuer");
      if (state_->has_snapshot()) restore(state_->load_snapshot());
    }
  }

  const std::string& actor_id() const override { return id_; }
  const PublicKey& public_key() const { return public_key_; }
  IssuerLedger& ledger() { return ledger_; }
  std::shared_ptr<Clock> clock() const { return clock_; }

  WireReply handle(const WireRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    try {
      if (request.method == "GET" && request.path == "/health")
        return json_reply(200, Json{{"actor", id_}, {"status", "ok"}});
      if (request.method == "POST" && request.path == "/issue")
        return do_issue(Json::parse(request.body));
      if (request.method == "POST" && request.path == "/revoke")
        return do_revoke(Json::parse(request.body));
      if (request.method == "GET" &&
          request.path.rfind("/validity/by-fingerprint/", 0) == 0)
        return validity_json(ledger_.check_fingerprint(
            b64url_to<32>(request.path.substr(25)), clock_->now()));
      if (request.method == "GET" && request.path.rfind("/validity/", 0) == 0)
        return validity_json(ledger_.check_expiration(
            b64url_to<16>(request.path.substr(10)), clock_->now()));
      return error_reply(404, "no_such_endpoint");
    } catch (const Json::exception&) {
      return error_reply(400, "bad_request");
    } catch (const Error& e) {
      return error_reply(400, e.code());
    } catch (const std::exception&) {
      return error_reply(400, "bad_request");
    }
  }

  void persist() override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (state_) state_->write_snapshot(Json{{"ledger", ledger_.to_json()}});
  }

 private:
  void restore(const Json& snapshot) {
    try {
      ledger_ = IssuerLedger::from_json(require(snapshot, "ledger"));
    } catch (const CorruptState&) {
      throw;
    } catch (const std::exception& e) {
      throw CorruptState(std::string("issuer snapshot invalid: ") + e.what());
    }
  }

  WireReply do_issue(const Json& body) {
    std::string person_id = require(body, "person_id").get<std::string>();
    auto person = persons_.find(person_id);
    if (person == persons_.end()) return error_reply(404, "unknown_person");
    std::vector<AttributeId> selection;
    if (body.contains("selection")) {
      for (const auto& id : body["selection"])
        selection.push_back(id.get<std::string>());
    } else {
      for (const auto& [id, value] : person->second) selection.push_back(id);
    }
    std::int64_t valid_days =
        body.contains("valid_days") ? body["valid_days"].get<std::int64_t>()
                                    : 365;
    UtcTime now = clock_->now();
    CredentialBundle bundle =
        issue_bundle(person->second, selection, now, now.plus_days(valid_days),
                     id_, secret_, registry_, rng_);
    ledger_.record_issuance(bundle);
    if (state_)
      state_->append_journal(Json{{"at", now.iso()},
                                  {"event", "issue"},
                                  {"person_id", person_id},
                                  {"bundle_id", b64url(bundle.bundle_id)}});
    return json_reply(200, bundle_to_json(bundle));
  }

  WireReply do_revoke(const Json& body) {
    BundleId id = fixed_from_json<16>(require(body, "bundle_id"));
    UtcTime now = clock_->now();
    if (!ledger_.revoke(id, now)) return error_reply(404, "unknown_bundle");
    if (state_)
      state_->append_journal(Json{{"at", now.iso()},
                                  {"event", "revoke"},
                                  {"bundle_id", b64url(id)}});
    return json_reply(200, Json{{"status", "revoked"}});
  }

  static WireReply validity_json(const ExpirationResult& r) {
    Json j{{"status", r.status == ExpirationStatus::valid     ? "valid"
                      : r.status == ExpirationStatus::expired ? "expired"
                                                              : "unknown"}};
    if (r.valid_until) j["valid_until"] = r.valid_until->iso();
    return json_reply(200, j);
  }

  std::string id_;
  std::map<std::string, std::map<AttributeId, std::string>> persons_;
  SecretSeed secret_;
  PublicKey public_key_;
  AttributeRegistry registry_;
  IssuerLedger ledger_;
  std::shared_ptr<Clock> clock_;
  SeededRng rng_;
  std::optional<StateDir> state_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Identity provider
// ---------------------------------------------------------------------------

/// Verifies presentations (wallet flow) and performs mediated matching
/// against registered wallets (federated flow). Validity questions go to the
/// issuer -- over the wire by default, or through a direct hook when issuer
/// and identity provider share a process. The audit log grows by exactly one
/// entry per verification request processed.
class IdpActor final : public Actor {
 public:
  IdpActor(std::string id, const PublicKey& trusted_issuer,
           AttributeRegistry registry, std::shared_ptr<Clock> clock,
           std::string state_dir = "")
      : id_(std::move(id)),
        trusted_issuer_(trusted_issuer),
        registry_(std::move(registry)),
        clock_(std::move(clock)) {
    if (!state_dir.empty()) {
      state_.emplace(state_dir, id_ + ".idp");
      if (state_->has_snapshot()) restore(state_->load_snapshot());
    }
  }

  void wire(Transport* net, std::string issuer_peer) {
    net_ = net;
    issuer_peer_ = std::move(issuer_peer);
  }

  /// Direct validity hooks for the combined issuer+idp role; when unset,
  /// questions travel to `issuer_peer` over the transport.
  void set_validity_source(
      std::function<ExpirationResult(const Digest32&)> by_fingerprint,
      std::function<ExpirationResult(const BundleId&)> by_id) {
    validity_by_fp_ = std::move(by_fingerprint);
    validity_by_id_ = std::move(by_id);
  }

  const std::string& actor_id() const override { return id_; }
  const std::vector<Json>& audit_log() const { return audit_; }
  std::uint64_t notifications_sent() const { return notifications_sent_; }

  WireReply handle(const WireRequest& request) override {
    try {
      // Initiation forwards to the provider, and the provider calls back into
      // this actor's /fim/verify before replying -- so initiation must not
      // hold the lock across that round trip. It locks only for the lookup.
      if (request.method == "POST" && request.path == "/initiate")
        return do_initiate(Json::parse(request.body));
      std::lock_guard<std::mutex> lock(mutex_);
      if (request.method == "GET" && request.path == "/health")
        return json_reply(200, Json{{"actor", id_}, {"status", "ok"}});
      if (request.method == "GET" && request.path == "/audit")
        return json_reply(200, Json{{"entries", audit_.size()}});
      if (request.method == "POST" && request.path == "/register")
        return do_register(Json::parse(request.body));
      if (request.method == "POST" && request.path == "/verify")
        return do_verify(Json::parse(request.body));
      if (request.method == "POST" && request.path == "/fim/verify")
        return do_fim_verify(Json::parse(request.body));
      return error_reply(404, "no_such_endpoint");
    } catch (const Json::exception&) {
      return error_reply(400, "bad_request");
    } catch (const Error& e) {
      return error_reply(400, e.code());
    } catch (const std::exception&) {
      return error_reply(400, "bad_request");
    }
  }

  void persist() override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!state_) return;
    Json regs = Json::object();
    for (const auto& [handle, reg] : registrations_)
      regs[handle] = Json{{"bundle", bundle_to_json(reg.bundle)},
                          {"notify_peer", reg.notify_peer}};
    state_->write_snapshot(Json{{"registrations", regs}, {"audit", audit_}});
  }

 private:
  struct Registration {
    CredentialBundle bundle;
    std::string notify_peer;
  };

  void restore(const Json& snapshot) {
    try {
      for (const auto& [handle, reg] :
           require(snapshot, "registrations").items())
        registrations_[handle] =
            Registration{bundle_from_json(require(reg, "bundle")),
                         require(reg, "notify_peer").get<std::string>()};
      for (const auto& entry : require(snapshot, "audit")) audit_.push_back(entry);
    } catch (const std::exception& e) {
      throw CorruptState(std::string("idp snapshot invalid: ") + e.what());
    }
  }

  ExpirationResult validity_by_fingerprint(const Digest32& fp) {
    if (validity_by_fp_) return validity_by_fp_(fp);
    WireReply reply = peer_call(
        issuer_peer_, {"GET", "/validity/by-fingerprint/" + b64url(fp), ""});
    return parse_validity(reply);
  }

  ExpirationResult validity_by_id(const BundleId& id) {
    if (validity_by_id_) return validity_by_id_(id);
    WireReply reply =
        peer_call(issuer_peer_, {"GET", "/validity/" + b64url(id), ""});
    return parse_validity(reply);
  }

  static ExpirationResult parse_validity(const WireReply& reply) {
    if (reply.status != 200) return {ExpirationStatus::unknown, std::nullopt};
    Json j = Json::parse(reply.body);
    std::string status = require(j, "status").get<std::string>();
    ExpirationResult out;
    out.status = status == "valid"     ? ExpirationStatus::valid
                 : status == "expired" ? ExpirationStatus::expired
                                       : ExpirationStatus::unknown;
    if (j.contains("valid_until"))
      out.valid_until = UtcTime::from_iso(j["valid_until"].get<std::string>());
    return out;
  }

  WireReply peer_call(const std::string& to, const WireRequest& request) {
    if (!net_) throw ConfigError("idp has no transport wired");
    return net_->call(id_, to, request);
  }

  WireReply do_register(const Json& body) {
    CredentialBundle bundle = bundle_from_json(require(body, "bundle"));
    std::string handle = require(body, "ds_handle").get<std::string>();
    std::string notify_peer = require(body, "notify_peer").get<std::string>();
    bool signature_ok = ed25519::verify(
        trusted_issuer_,
        bundle_signing_payload(bundle.issuer_id, bundle.sorted_digests(),
                               bundle.valid_from, bundle.valid_until),
        bundle.signature);
    if (!signature_ok) return error_reply(400, "invalid_bundle");
    if (validity_by_id(bundle.bundle_id).status != ExpirationStatus::valid)
      return error_reply(400, "expired");
    registrations_[handle] = Registration{std::move(bundle), notify_peer};
    UtcTime now = clock_->now();
    audit_note(Json{{"at", now.iso()},
                    {"event", "register"},
                    {"ds_handle", handle}});
    return json_reply(200, Json{{"status", "registered"}});
  }

  WireReply do_initiate(const Json& body) {
    std::string to_sp = require(body, "to_sp").get<std::string>();
    Envelope env = envelope_from_json(require(body, "envelope"), registry_);
    const auto* req = std::get_if<DsrRequest>(&env.message);
    bool registered = false;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      registered =
          req && req->ds_handle && registrations_.count(*req->ds_handle) > 0;
    }
    const Envelope& forward = idp_forward_initiation(env, registered);
    // Forwarded unchanged; the reply (the provider's answer) relays verbatim.
    return peer_call(
        to_sp, {"POST", "/dsr", canonical_dump(envelope_to_json(forward))});
  }

  WireReply do_verify(const Json& body) {
    Envelope env = envelope_from_json(body, registry_);
    const auto* msg = std::get_if<VerificationRequest>(&env.message);
    if (!msg) return error_reply(400, "bad_request");
    UtcTime now = clock_->now();
    VerificationResponse response = idp_handle_verification(
        *msg, trusted_issuer_,
        [this](const Digest32& fp) { return validity_by_fingerprint(fp); },
        now);
    audit_note(Json{{"at", now.iso()},
                    {"event", "verify"},
                    {"request_id", env.request_id},
                    {"verdict", std::string(verdict_name(response.verdict))}});
    return json_reply(200, message_to_json(ProtocolMessage{response}));
  }

  WireReply do_fim_verify(const Json& body) {
    Envelope env = envelope_from_json(body, registry_);
    const auto* msg = std::get_if<FimVerificationRequest>(&env.message);
    if (!msg) return error_reply(400, "bad_request");
    UtcTime now = clock_->now();
    auto reg = registrations_.find(msg->ds_handle);
    const CredentialBundle* bundle =
        reg == registrations_.end() ? nullptr : &reg->second.bundle;
    auto [note, response] = idp_handle_fim_request(
        *msg, bundle,
        [this](const Digest32& fp) { return validity_by_fingerprint(fp); },
        now);
    if (note) {
      peer_call(reg->second.notify_peer,
                {"POST", "/notify",
                 canonical_dump(envelope_to_json(
                     Envelope{env.request_id, ProtocolMessage{*note}}))});
      ++notifications_sent_;
    }
    audit_note(Json{{"at", now.iso()},
                    {"event", "fim_verify"},
                    {"request_id", env.request_id},
                    {"verdict", std::string(verdict_name(response.verdict))}});
    return json_reply(200, message_to_json(ProtocolMessage{response}));
  }

  void audit_note(Json entry) {
    if (state_) state_->append_journal(entry);
    audit_.push_back(std::move(entry));  // append-only by construction
  }

  std::string id_;
  PublicKey trusted_issuer_;
  AttributeRegistry registry_;
  std::map<std::string, Registration> registrations_;
  std::vector<Json> audit_;
  std::uint64_t notifications_sent_ = 0;
  std::function<ExpirationResult(const Digest32&)> validity_by_fp_;
  std::function<ExpirationResult(const BundleId&)> validity_by_id_;
  Transport* net_ = nullptr;
  std::string issuer_peer_;
  std::shared_ptr<Clock> clock_;
  std::optional<StateDir> state_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Service provider
// ---------------------------------------------------------------------------

/// The data controller. Drives a whole rights request to its terminal answer
/// within one /dsr exchange: challenge the wallet (or hand the mapping to the
/// identity provider), match locally, forward for verification, execute.
/// Replies are cached per request id, so redelivered requests get the
/// original bytes back and never execute twice. Every decline, whatever its
/// cause, is the same canonical byte string.
class SpActor final : public Actor {
 public:
  SpActor(std::string id, Store store, MatchPolicy policy, DisclosureMode mode,
          std::shared_ptr<Clock> clock, std::uint64_t seed,
          std::string state_dir = "")
      : id_(std::move(id)),
        store_(std::move(store)),
        policy_(std::move(policy)),
        config_{id_, mode},
        clock_(std::move(clock)),
        rng_(seed) {
    if (!state_dir.empty()) {
      state_.emplace(state_dir, id_ + ".sp");
      if (state_->has_snapshot()) restore(state_->load_snapshot());
    }
  }

  void wire(Transport* net, std::string idp_peer) {
    net_ = net;
    idp_peer_ = std::move(idp_peer);
  }

  const std::string& actor_id() const override { return id_; }
  Store& store() { return store_; }
  const DsrJournal& journal() const { return journal_; }

  WireReply handle(const WireRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    try {
      if (request.method == "GET" && request.path == "/health")
        return json_reply(200, Json{{"actor", id_}, {"status", "ok"}});
      if (request.method == "GET" && request.path == "/journal") {
        Json entries = Json::array();
        for (const auto& e : journal_.entries())
          entries.push_back(e.to_json(clock_->now()));
        return json_reply(200, Json{{"entries", entries}});
      }
      if (request.method == "POST" && request.path == "/dsr")
        return do_dsr(Json::parse(request.body));
      return error_reply(404, "no_such_endpoint");
    } catch (const Json::exception&) {
      return error_reply(400, "bad_request");
    } catch (const Error& e) {
      return error_reply(400, e.code());
    } catch (const std::exception&) {
      return error_reply(400, "bad_request");
    }
  }

  void persist() override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!state_) return;
    Json datasets = Json::array();
    for (const auto& ds : store_.datasets()) datasets.push_back(dataset_to_json(ds));
    Json entries = Json::array();
    for (const auto& e : journal_.entries()) entries.push_back(dsr_entry_to_json(e));
    state_->write_snapshot(Json{{"datasets", datasets}, {"journal", entries}});
  }

 private:
  void restore(const Json& snapshot) {
    try {
      Store restored(store_.registry());
      for (const auto& ds : require(snapshot, "datasets"))
        restored.add_dataset(dataset_from_json(ds, store_.registry()));
      store_ = std::move(restored);
      for (const auto& e : require(snapshot, "journal")) {
        DSRRequestRecord& rec = journal_.open(
            require(e, "request_id").get<std::string>(),
            dsr_type_parse(require(e, "dsr_type").get<std::string>()),
            scope_from_json(require(e, "scope")),
            UtcTime::from_iso(require(e, "received_at").get<std::string>()));
        rec.fulfilled = require(e, "fulfilled").get<bool>();
        rec.declined = require(e, "declined").get<bool>();
        if (e.contains("resolved_at"))
          rec.resolved_at =
              UtcTime::from_iso(e["resolved_at"].get<std::string>());
      }
    } catch (const CorruptState&) {
      throw;
    } catch (const std::exception& e) {
      throw CorruptState(std::string("sp snapshot invalid: ") + e.what());
    }
  }

  /// The one canonical decline. Status 200: a decline is a completed
  /// exchange with a negative verdict, not a transport failure, and the
  /// status must not say more than the body does.
  WireReply decline_reply(const std::string& request_id, UtcTime now) {
    DSRRequestRecord* entry = journal_.find(request_id);
    if (entry && !entry->fulfilled && !entry->declined) {
      entry->declined = true;
      entry->resolved_at = now;
    }
    journal_event(request_id, "declined", now);
    return json_reply(200, message_to_json(ProtocolMessage{
                               DsrResult{DsrResultStatus::declined,
                                         std::nullopt}}));
  }

  void journal_event(const std::string& request_id, std::string_view outcome,
                     UtcTime at) {
    if (state_)
      state_->append_journal(Json{{"at", at.iso()},
                                  {"event", "dsr"},
                                  {"request_id", request_id},
                                  {"outcome", std::string(outcome)}});
  }

  WireReply do_dsr(const Json& body) {
    Envelope env = envelope_from_json(body, store_.registry());
    const auto* msg = std::get_if<DsrRequest>(&env.message);
    if (!msg) return error_reply(400, "bad_request");
    auto cached = reply_cache_.find(env.request_id);
    if (cached != reply_cache_.end()) return cached->second;

    UtcTime now = clock_->now();
    // Journaled on receipt: the statutory clock runs from here whatever the
    // outcome. A redelivery that missed the reply cache (transport failure
    // mid-flow) reuses its original entry.
    if (!journal_.find(env.request_id))
      journal_.open(env.request_id, msg->dsr_type, msg->scope, now);
    SpSession& session = sessions_[env.request_id];

    WireReply reply = run_flow(session, env.request_id, *msg, now);
    reply_cache_[env.request_id] = reply;
    return reply;
  }

  WireReply run_flow(SpSession& session, const std::string& request_id,
                     const DsrRequest& msg, UtcTime now) {
    std::variant<CredentialRequest, FimVerificationRequest> opening;
    try {
      opening = sp_handle_dsr_request(session, request_id, msg, store_,
                                      policy_, config_, rng_);
    } catch (const Error&) {
      // Unknown scope ids and absent handles end exactly like a failed
      // match: nothing about the store may leak through the error surface.
      return decline_reply(request_id, now);
    }

    if (const auto* challenge = std::get_if<CredentialRequest>(&opening)) {
      if (!msg.reply_channel) return decline_reply(request_id, now);
      WireReply wallet_reply = net_->call(
          id_, *msg.reply_channel,
          {"POST", "/credential-request",
           canonical_dump(envelope_to_json(
               Envelope{request_id, ProtocolMessage{*challenge}}))});
      if (wallet_reply.status != 200) return decline_reply(request_id, now);

      std::optional<VerificationRequest> forward;
      try {
        ProtocolMessage reply_msg = message_from_json(
            Json::parse(wallet_reply.body), store_.registry());
        const auto* response = std::get_if<CredentialResponse>(&reply_msg);
        if (!response) return decline_reply(request_id, now);
        forward = sp_handle_credential_response(session, *response, store_,
                                                policy_, now);
      } catch (const std::exception&) {
        return decline_reply(request_id, now);
      }
      if (!forward) return decline_reply(request_id, now);
      return finalize_with_idp(session, request_id,
                               ProtocolMessage{*forward}, "/verify", now);
    }

    const auto& fim = std::get<FimVerificationRequest>(opening);
    return finalize_with_idp(session, request_id, ProtocolMessage{fim},
                             "/fim/verify", now);
  }

  WireReply finalize_with_idp(SpSession& session, const std::string& request_id,
                              const ProtocolMessage& message,
                              const std::string& path, UtcTime now) {
    WireReply idp_reply =
        net_->call(id_, idp_peer_,
                   {"POST", path,
                    canonical_dump(envelope_to_json(
                        Envelope{request_id, message}))});
    VerificationResponse verdict{Verdict::decline};
    if (idp_reply.status == 200) {
      try {
        ProtocolMessage reply_msg =
            message_from_json(Json::parse(idp_reply.body), store_.registry());
        if (const auto* v = std::get_if<VerificationResponse>(&reply_msg))
          verdict = *v;
      } catch (const std::exception&) {
      }
    }
    DsrResult result =
        sp_finalize(session, verdict, store_, *journal_.find(request_id), now);
    journal_event(request_id, dsr_result_status_name(result.status), now);
    // A declined result serializes to the same bytes decline_reply() emits.
    return json_reply(200, message_to_json(ProtocolMessage{result}));
  }

  std::string id_;
  Store store_;
  MatchPolicy policy_;
  SpConfig config_;
  DsrJournal journal_;
  std::map<std::string, SpSession> sessions_;
  std::map<std::string, WireReply> reply_cache_;
  Transport* net_ = nullptr;
  std::string idp_peer_;
  std::shared_ptr<Clock> clock_;
  SeededRng rng_;
  std::optional<StateDir> state_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Wallet
// ---------------------------------------------------------------------------

/// How the wallet operator answers consent prompts. Scripted, because actors
/// run headless; an interactive front end would produce the same values.
struct ConsentScript {
  enum class Kind { approve_all, approve_listed, deny, timeout };
  Kind kind = Kind::approve_all;
  std::set<AttributeId> listed;

  static ConsentScript parse(const std::string& spec) {
    ConsentScript s;
    if (spec == "approve_all") s.kind = Kind::approve_all;
    else if (spec == "deny_all") s.kind = Kind::deny;
    else if (spec == "timeout") s.kind = Kind::timeout;
    else if (spec.rfind("approve:", 0) == 0) {
      s.kind = Kind::approve_listed;
      std::istringstream in(spec.substr(8));
      std::string id;
      while (std::getline(in, id, ','))
        if (!id.empty()) s.listed.insert(id);
    } else {
      throw ConfigError("consent must be approve_all, deny_all, timeout, or "
                        "approve:<id,...>");
    }
    return s;
  }
};

/// The user device. Serves the challenge callback and the notification inbox,
/// and owns the client side of every flow a data subject initiates. All local
/// aborts (refused consent, timeout, expired bundle, no bundle) answer with
/// one identical body, so the provider learns nothing about which it was.
class WalletActor final : public Actor {
 public:
  WalletActor(std::string id, ConsentScript consent,
              std::shared_ptr<Clock> clock, std::string state_dir = "")
      : id_(std::move(id)), consent_(std::move(consent)),
        clock_(std::move(clock)) {
    if (!state_dir.empty()) {
      state_.emplace(state_dir, id_ + ".wallet");
      if (state_->has_snapshot()) restore(state_->load_snapshot());
    }
  }

  void wire(Transport* net) { net_ = net; }
  void set_consent(ConsentScript consent) { consent_ = std::move(consent); }
  void add_bundle(CredentialBundle bundle) {
    bundles_.push_back(std::move(bundle));
  }
  const std::vector<CredentialBundle>& bundles() const { return bundles_; }
  const std::vector<Json>& notifications() const { return notifications_; }
  const std::vector<Json>& consent_log() const { return consent_log_; }

  const std::string& actor_id() const override { return id_; }

  WireReply handle(const WireRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    try {
      if (request.method == "GET" && request.path == "/health")
        return json_reply(200, Json{{"actor", id_}, {"status", "ok"}});
      if (request.method == "GET" && request.path == "/notifications")
        return json_reply(200, Json{{"notifications", notifications_}});
      if (request.method == "POST" && request.path == "/credential-request")
        return do_credential_request(Json::parse(request.body));
      if (request.method == "POST" && request.path == "/notify")
        return do_notify(Json::parse(request.body));
      return error_reply(404, "no_such_endpoint");
    } catch (const Json::exception&) {
      return error_reply(400, "bad_request");
    } catch (const Error& e) {
      return error_reply(400, e.code());
    } catch (const std::exception&) {
      return error_reply(400, "bad_request");
    }
  }

  void persist() override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!state_) return;
    Json bundles = Json::array();
    for (const auto& b : bundles_) bundles.push_back(bundle_to_json(b));
    state_->write_snapshot(Json{{"bundles", bundles},
                                {"notifications", notifications_},
                                {"consent_log", consent_log_}});
  }

  // ---- client side (the data subject acting) -----------------------------

  /// Ask the issuer for an eID and keep it. Returns the issued bundle.
  const CredentialBundle& acquire_bundle(const std::string& issuer_peer,
                                         const std::string& person_id,
                                         std::vector<AttributeId> selection,
                                         std::int64_t valid_days = 365) {
    Json body{{"person_id", person_id}, {"valid_days", valid_days}};
    if (!selection.empty()) {
      Json sel = Json::array();
      for (const auto& id : selection) sel.push_back(id);
      body["selection"] = sel;
    }
    WireReply reply =
        call(issuer_peer, {"POST", "/issue", canonical_dump(body)});
    if (reply.status != 200)
      throw ConfigError("issuance failed: " + reply.body);
    std::lock_guard<std::mutex> lock(mutex_);
    bundles_.push_back(bundle_from_json(Json::parse(reply.body)));
    return bundles_.back();
  }

  /// Register the newest bundle at an identity provider under a handle.
  void register_at_idp(const std::string& idp_peer,
                       const std::string& ds_handle) {
    const CredentialBundle* bundle = active_bundle();
    if (!bundle) throw ConfigError("wallet holds no bundle to register");
    Json body{{"ds_handle", ds_handle},
              {"bundle", bundle_to_json(*bundle)},
              {"notify_peer", id_}};
    WireReply reply =
        call(idp_peer, {"POST", "/register", canonical_dump(body)});
    if (reply.status != 200)
      throw ConfigError("registration failed: " + reply.body);
  }

  /// Wallet flow: send the rights request straight to the provider. The
  /// challenge comes back to this actor's /credential-request endpoint.
  WireReply initiate_ssi(const std::string& sp_peer,
                         const std::string& request_id, DsrType type,
                         const Scope& scope) {
    DsrRequest req;
    req.dsr_type = type;
    req.scope = scope;
    req.flow = Flow::ssi;
    req.reply_channel = id_;
    return call(sp_peer,
                {"POST", "/dsr",
                 canonical_dump(envelope_to_json(
                     Envelope{request_id, ProtocolMessage{req}}))});
  }

  /// Mediated flow: hand the request to the identity provider, which
  /// forwards it to the provider after vouching for the handle.
  WireReply initiate_fim(const std::string& idp_peer, const std::string& sp_id,
                         const std::string& request_id, DsrType type,
                         const Scope& scope, const std::string& ds_handle) {
    Envelope env{request_id,
                 ProtocolMessage{wallet_build_fim_request(type, scope,
                                                          ds_handle)}};
    Json body{{"to_sp", sp_id}, {"envelope", envelope_to_json(env)}};
    return call(idp_peer, {"POST", "/initiate", canonical_dump(body)});
  }

 private:
  void restore(const Json& snapshot) {
    try {
      for (const auto& b : require(snapshot, "bundles"))
        bundles_.push_back(bundle_from_json(b));
      for (const auto& n : require(snapshot, "notifications"))
        notifications_.push_back(n);
      for (const auto& c : require(snapshot, "consent_log"))
        consent_log_.push_back(c);
    } catch (const std::exception& e) {
      throw CorruptState(std::string("wallet snapshot invalid: ") + e.what());
    }
  }

  WireReply call(const std::string& to, const WireRequest& request) {
    if (!net_) throw ConfigError("wallet has no transport wired");
    return net_->call(id_, to, request);
  }

  const CredentialBundle* active_bundle() const {
    return bundles_.empty() ? nullptr : &bundles_.back();
  }

  /// One body for every local abort; the cause stays on the device.
  static WireReply abort_reply() { return error_reply(403, "aborted"); }

  WireReply do_credential_request(const Json& body) {
    Envelope env = envelope_from_json(body, AttributeRegistry::with_defaults());
    const auto* challenge = std::get_if<CredentialRequest>(&env.message);
    if (!challenge) return error_reply(400, "bad_request");
    UtcTime now = clock_->now();

    const CredentialBundle* bundle = active_bundle();
    Consent consent;
    switch (consent_.kind) {
      case ConsentScript::Kind::approve_all:
        for (const auto& t : challenge->requested)
          consent.approved.insert(t.id);
        break;
      case ConsentScript::Kind::approve_listed:
        for (const auto& t : challenge->requested)
          if (consent_.listed.count(t.id)) consent.approved.insert(t.id);
        break;
      case ConsentScript::Kind::deny:
        consent.denied = true;
        break;
      case ConsentScript::Kind::timeout:
        // An unanswered prompt is a refusal (ConsentTimeout acts as denial).
        log_consent(env.request_id, challenge->sp_id, "timeout", now);
        return abort_reply();
    }
    if (!bundle) {
      log_consent(env.request_id, challenge->sp_id, "no_bundle", now);
      return abort_reply();
    }
    try {
      CredentialResponse response =
          wallet_handle_credential_request(*challenge, *bundle, consent, now);
      log_consent(env.request_id, challenge->sp_id, "approved", now);
      return json_reply(200, message_to_json(ProtocolMessage{response}));
    } catch (const ConsentDenied&) {
      log_consent(env.request_id, challenge->sp_id, "denied", now);
      return abort_reply();
    } catch (const ExpiredBundle&) {
      log_consent(env.request_id, challenge->sp_id, "expired_bundle", now);
      return abort_reply();
    }
  }

  WireReply do_notify(const Json& body) {
    Envelope env = envelope_from_json(body, AttributeRegistry::with_defaults());
    const auto* note = std::get_if<DeviceNotification>(&env.message);
    if (!note) return error_reply(400, "bad_request");
    Json entry = message_to_json(env.message);
    entry["request_id"] = env.request_id;
    notifications_.push_back(std::move(entry));
    if (state_)
      state_->append_journal(Json{{"at", clock_->now().iso()},
                                  {"event", "notification"},
                                  {"sp_id", note->sp_id}});
    return json_reply(200, Json{{"status", "ok"}});
  }

  void log_consent(const std::string& request_id, const std::string& sp_id,
                   std::string_view decision, UtcTime at) {
    consent_log_.push_back(Json{{"at", at.iso()},
                                {"request_id", request_id},
                                {"sp_id", sp_id},
                                {"decision", std::string(decision)}});
  }

  std::string id_;
  ConsentScript consent_;
  std::vector<CredentialBundle> bundles_;
  std::vector<Json> notifications_;
  std::vector<Json> consent_log_;
  Transport* net_ = nullptr;
  std::shared_ptr<Clock> clock_;
  std::optional<StateDir> state_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Combined issuer + identity provider
// ---------------------------------------------------------------------------

/// Both roles in one process under one actor id: shared key material (the
/// identity provider trusts the issuer key it lives with), separate state.
/// Validity questions short-circuit to the in-process ledger instead of
/// traveling the wire.
class CombinedIssuerIdpActor final : public Actor {
 public:
  CombinedIssuerIdpActor(
      std::string id,
      std::map<std::string, std::map<AttributeId, std::string>> persons,
      const SecretSeed& secret, AttributeRegistry registry,
      std::shared_ptr<Clock> clock, std::uint64_t seed,
      std::string state_dir = "")
      : id_(std::move(id)),
        issuer_(id_, std::move(persons), secret, registry, clock, seed,
                state_dir),
        idp_(id_, issuer_.public_key(), std::move(registry), clock,
             state_dir) {
    idp_.set_validity_source(
        [this](const Digest32& fp) {
          return issuer_.ledger().check_fingerprint(
              fp, issuer_.clock()->now());
        },
        [this](const BundleId& id) {
          return issuer_.ledger().check_expiration(id,
                                                   issuer_.clock()->now());
        });
  }

  void wire(Transport* net) { idp_.wire(net, /*issuer_peer=*/""); }

  IssuerActor& issuer() { return issuer_; }
  IdpActor& idp() { return idp_; }

  const std::string& actor_id() const override { return id_; }

  WireReply handle(const WireRequest& request) override {
    if (request.path == "/issue" || request.path == "/revoke" ||
        request.path.rfind("/validity/", 0) == 0)
      return issuer_.handle(request);
    if (request.path == "/health")
      return json_reply(200, Json{{"actor", id_}, {"status", "ok"}});
    return idp_.handle(request);
  }

  void persist() override {
    issuer_.persist();
    idp_.persist();
  }

 private:
  std::string id_;
  IssuerActor issuer_;
  IdpActor idp_;
};

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

inline Json load_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON");
  }
}

inline std::map<std::string, std::map<AttributeId, std::string>>
load_persons_file(const std::string& path) {
  std::map<std::string, std::map<AttributeId, std::string>> persons;
  Json j = load_json_file(path);
  for (const auto& [person_id, attrs] : require(j, "persons").items())
    for (const auto& [attr_id, value] : attrs.items())
      persons[person_id][attr_id] = value.get<std::string>();
  return persons;
}

inline SecretSeed load_seed_file(const std::string& path) {
  std::string text = read_text_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
    text.pop_back();
  return b64url_to<32>(text);
}

inline PublicKey load_pubkey_file(const std::string& path) {
  std::string text = read_text_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
    text.pop_back();
  return b64url_to<32>(text);
}

inline Store load_store_file(const std::string& path,
                             const AttributeRegistry& registry) {
  Store store(registry);
  Json j = load_json_file(path);
  for (const auto& ds : require(j, "datasets"))
    store.add_dataset(dataset_from_json(ds, registry));
  return store;
}

/// Build an actor from configuration, loading its fixture files. The
/// transport must outlive the actor; peers are wired by actor id.
inline std::unique_ptr<Actor> make_actor(const ActorConfig& cfg,
                                         Transport* net) {
  auto clock = make_clock(cfg.clock);
  AttributeRegistry registry = AttributeRegistry::with_defaults();
  if (cfg.kind == "issuer") {
    if (cfg.registry_path.empty() || cfg.key_path.empty())
      throw ConfigError("issuer needs 'registry' and 'key'");
    return std::make_unique<IssuerActor>(
        cfg.id, load_persons_file(cfg.registry_path),
        load_seed_file(cfg.key_path), registry, clock, cfg.seed,
        cfg.state_dir);
  }
  if (cfg.kind == "idp") {
    if (cfg.trust_path.empty())
      throw ConfigError("idp needs 'trust' (issuer public key)");
    auto idp = std::make_unique<IdpActor>(cfg.id,
                                          load_pubkey_file(cfg.trust_path),
                                          registry, clock, cfg.state_dir);
    idp->wire(net, cfg.issuer_peer);
    return idp;
  }
  if (cfg.kind == "sp") {
    if (cfg.store_path.empty()) throw ConfigError("sp needs 'store'");
    MatchPolicy policy;
    if (!cfg.policy_path.empty())
      policy = policy_from_json(load_json_file(cfg.policy_path));
    auto sp = std::make_unique<SpActor>(
        cfg.id, load_store_file(cfg.store_path, registry), policy,
        disclosure_mode_parse(cfg.mode), clock, cfg.seed, cfg.state_dir);
    sp->wire(net, cfg.idp_peer);
    return sp;
  }
  if (cfg.kind == "wallet") {
    auto wallet = std::make_unique<WalletActor>(
        cfg.id, ConsentScript::parse(cfg.consent), clock, cfg.state_dir);
    wallet->wire(net);
    return wallet;
  }
  if (cfg.kind == "issuer+idp") {
    if (cfg.registry_path.empty() || cfg.key_path.empty())
      throw ConfigError("issuer+idp needs 'registry' and 'key'");
    auto combined = std::make_unique<CombinedIssuerIdpActor>(
        cfg.id, load_persons_file(cfg.registry_path),
        load_seed_file(cfg.key_path), registry, clock, cfg.seed,
        cfg.state_dir);
    combined->wire(net);
    return combined;
  }
  throw ConfigError("unknown actor kind '" + cfg.kind + "'");
}

}  // namespace dsra
