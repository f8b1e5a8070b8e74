// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// Message vocabulary and deterministic state transitions for the two rights
// flows: wallet-held credentials presented directly to the service provider
// (SSI), and identity-provider-mediated verification (FIM). Handlers are
// deterministic (state, message) -> (state, out-messages) steps; transports
// live elsewhere. Three rules shape everything here:
//   * uniform request: a service provider always asks every requester for its
//     full attribute catalog, so the ask itself leaks nothing about the match;
//   * opaque outcome: verification responses carry a bare verdict with one
//     canonical byte encoding per value, identical across all decline causes;
//   * notification duty: every mediated verification against a registered
//     wallet produces a device notification, accepted or not.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
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
#include "dsra/rng.hpp"
#include "dsra/time.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Flows
// ---------------------------------------------------------------------------

enum class Flow { ssi, fim };

inline std::string_view flow_name(Flow f) {
  return f == Flow::ssi ? "ssi" : "fim";
}

inline Flow flow_parse(std::string_view s) {
  if (s == "ssi") return Flow::ssi;
  if (s == "fim") return Flow::fim;
  throw ConfigError("bad flow '" + std::string(s) + "'");
}

inline Verdict verdict_parse(std::string_view s) {
  if (s == "accept") return Verdict::accept;
  if (s == "decline") return Verdict::decline;
  throw ConfigError("bad verdict '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

/// Opening move of either flow. In the mediated flow the requester identifies
/// itself by the handle its identity provider knows; in the wallet flow the
/// request carries no identity at all. `reply_channel` names a callback
/// address for asynchronous challenge delivery; absent means the challenge
/// rides the transport reply.
struct DsrRequest {
  DsrType dsr_type = DsrType::access;
  Scope scope = Scope::everything();
  Flow flow = Flow::ssi;
  std::optional<std::string> reply_channel;
  std::optional<std::string> ds_handle;  // required when flow == fim
};

/// The service provider's challenge. `requested` is always the full catalog
/// of its store, never narrowed to the request, so every requester sees the
/// same ask.
struct CredentialRequest {
  Nonce16 nonce{};
  std::vector<AttributeType> requested;  // ordered (catalog order)
  DisclosureMode mode = DisclosureMode::cleartext;
  std::string sp_id;
};

struct CredentialResponse {
  Presentation presentation;
};

/// SSI: the service provider forwards the presentation for cryptographic
/// verification. In hashed mode it attaches the stored canonical values of
/// the attributes that matched, and only those, so the verifier can check
/// commitments without the wallet ever sending plaintext.
struct VerificationRequest {
  Presentation presentation;
  RevealedValues revealed_values;  // hashed mode only; may be empty
};

/// FIM: the service provider sends the values that exist in the scoped data
/// sets and asks the identity provider to do the mapping against the wallet
/// it registered. The provider declares the policy the decision must follow.
struct FimVerificationRequest {
  std::string sp_id;
  std::vector<AttributeType> required;  // types present in the scoped sets
  std::map<AttributeId, std::set<std::string>> candidate_values;
  std::string ds_handle;
  MatchPolicy policy;
  Sensitivity sensitivity = Sensitivity::normal;
};

/// Exactly the verdict, nothing else.
struct VerificationResponse {
  Verdict verdict = Verdict::decline;
};

/// Mediated verifications are visible to the wallet holder: the identity
/// provider reports who asked and for which attribute types, accepted or not,
/// so failed probes are as visible as successful logins.
struct DeviceNotification {
  std::string sp_id;
  std::vector<AttributeId> required_types;
  UtcTime timestamp;
};

enum class DsrResultStatus { fulfilled, declined };

inline std::string_view dsr_result_status_name(DsrResultStatus s) {
  return s == DsrResultStatus::fulfilled ? "fulfilled" : "declined";
}

/// Terminal answer to the requester. A declined result carries no payload and
/// no hint of which evidence fell short.
struct DsrResult {
  DsrResultStatus status = DsrResultStatus::declined;
  std::optional<Json> payload;  // access: exported records; erasure: count
};

using ProtocolMessage =
    std::variant<DsrRequest, CredentialRequest, CredentialResponse,
                 VerificationRequest, FimVerificationRequest,
                 VerificationResponse, DeviceNotification, DsrResult>;

inline std::string_view message_type_name(const ProtocolMessage& m) {
  struct Visitor {
    std::string_view operator()(const DsrRequest&) { return "dsr_request"; }
    std::string_view operator()(const CredentialRequest&) {
      return "credential_request";
    }
    std::string_view operator()(const CredentialResponse&) {
      return "credential_response";
    }
    std::string_view operator()(const VerificationRequest&) {
      return "verification_request";
    }
    std::string_view operator()(const FimVerificationRequest&) {
      return "fim_verification_request";
    }
    std::string_view operator()(const VerificationResponse&) {
      return "verification_response";
    }
    std::string_view operator()(const DeviceNotification&) {
      return "device_notification";
    }
    std::string_view operator()(const DsrResult&) { return "dsr_result"; }
  };
  return std::visit(Visitor{}, m);
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

inline Json attr_type_to_json(const AttributeType& t) {
  return Json{{"id", t.id},
              {"kind", std::string(attr_kind_name(t.kind))},
              {"sensitive", t.sensitive}};
}

inline AttributeType attr_type_from_json(const Json& j) {
  return AttributeType{require(j, "id").get<std::string>(),
                       attr_kind_parse(require(j, "kind").get<std::string>()),
                       require(j, "sensitive").get<bool>()};
}

inline Json message_to_json(const ProtocolMessage& m) {
  struct Visitor {
    Json operator()(const DsrRequest& v) {
      Json j{{"type", "dsr_request"},
             {"dsr_type", std::string(dsr_type_name(v.dsr_type))},
             {"scope", scope_to_json(v.scope)},
             {"flow", std::string(flow_name(v.flow))}};
      if (v.reply_channel) j["reply_channel"] = *v.reply_channel;
      if (v.ds_handle) j["ds_handle"] = *v.ds_handle;
      return j;
    }
    Json operator()(const CredentialRequest& v) {
      Json requested = Json::array();
      for (const auto& t : v.requested)
        requested.push_back(attr_type_to_json(t));
      return Json{{"type", "credential_request"},
                  {"nonce", b64url(v.nonce)},
                  {"requested", requested},
                  {"mode", std::string(disclosure_mode_name(v.mode))},
                  {"sp_id", v.sp_id}};
    }
    Json operator()(const CredentialResponse& v) {
      return Json{{"type", "credential_response"},
                  {"presentation", presentation_to_json(v.presentation)}};
    }
    Json operator()(const VerificationRequest& v) {
      Json j{{"type", "verification_request"},
             {"presentation", presentation_to_json(v.presentation)}};
      if (!v.revealed_values.empty()) {
        Json revealed = Json::object();
        for (const auto& [id, value] : v.revealed_values) revealed[id] = value;
        j["revealed_values"] = revealed;
      }
      return j;
    }
    Json operator()(const FimVerificationRequest& v) {
      Json required = Json::array();
      for (const auto& t : v.required) required.push_back(attr_type_to_json(t));
      Json candidates = Json::object();
      for (const auto& [id, values] : v.candidate_values) {
        Json arr = Json::array();
        for (const auto& value : values) arr.push_back(value);  // set: sorted
        candidates[id] = arr;
      }
      return Json{{"type", "fim_verification_request"},
                  {"sp_id", v.sp_id},
                  {"required", required},
                  {"candidate_values", candidates},
                  {"ds_handle", v.ds_handle},
                  {"policy", policy_to_json(v.policy)},
                  {"sensitivity", std::string(sensitivity_name(v.sensitivity))}};
    }
    Json operator()(const VerificationResponse& v) {
      return Json{{"type", "verification_response"},
                  {"verdict", std::string(verdict_name(v.verdict))}};
    }
    Json operator()(const DeviceNotification& v) {
      Json types = Json::array();
      for (const auto& id : v.required_types) types.push_back(id);
      return Json{{"type", "device_notification"},
                  {"sp_id", v.sp_id},
                  {"required_types", types},
                  {"timestamp", time_to_json(v.timestamp)}};
    }
    Json operator()(const DsrResult& v) {
      Json j{{"type", "dsr_result"},
             {"status", std::string(dsr_result_status_name(v.status))}};
      if (v.payload) j["payload"] = *v.payload;
      return j;
    }
  };
  return std::visit(Visitor{}, m);
}

inline ProtocolMessage message_from_json(const Json& j,
                                         const AttributeRegistry& registry) {
  const std::string type = require(j, "type").get<std::string>();
  if (type == "dsr_request") {
    DsrRequest v;
    v.dsr_type = dsr_type_parse(require(j, "dsr_type").get<std::string>());
    v.scope = scope_from_json(require(j, "scope"));
    v.flow = flow_parse(require(j, "flow").get<std::string>());
    if (j.contains("reply_channel"))
      v.reply_channel = j["reply_channel"].get<std::string>();
    if (j.contains("ds_handle"))
      v.ds_handle = j["ds_handle"].get<std::string>();
    return v;
  }
  if (type == "credential_request") {
    CredentialRequest v;
    v.nonce = fixed_from_json<16>(require(j, "nonce"));
    for (const auto& t : require(j, "requested"))
      v.requested.push_back(attr_type_from_json(t));
    v.mode = disclosure_mode_parse(require(j, "mode").get<std::string>());
    v.sp_id = require(j, "sp_id").get<std::string>();
    return v;
  }
  if (type == "credential_response") {
    return CredentialResponse{
        presentation_from_json(require(j, "presentation"), registry)};
  }
  if (type == "verification_request") {
    VerificationRequest v;
    v.presentation =
        presentation_from_json(require(j, "presentation"), registry);
    if (j.contains("revealed_values"))
      for (const auto& [id, value] : j["revealed_values"].items())
        v.revealed_values[id] = value.get<std::string>();
    return v;
  }
  if (type == "fim_verification_request") {
    FimVerificationRequest v;
    v.sp_id = require(j, "sp_id").get<std::string>();
    for (const auto& t : require(j, "required"))
      v.required.push_back(attr_type_from_json(t));
    for (const auto& [id, values] : require(j, "candidate_values").items())
      for (const auto& value : values)
        v.candidate_values[id].insert(value.get<std::string>());
    v.ds_handle = require(j, "ds_handle").get<std::string>();
    v.policy = policy_from_json(require(j, "policy"));
    v.sensitivity =
        sensitivity_parse(require(j, "sensitivity").get<std::string>());
    return v;
  }
  if (type == "verification_response") {
    return VerificationResponse{
        verdict_parse(require(j, "verdict").get<std::string>())};
  }
  if (type == "device_notification") {
    DeviceNotification v;
    v.sp_id = require(j, "sp_id").get<std::string>();
    for (const auto& id : require(j, "required_types"))
      v.required_types.push_back(id.get<std::string>());
    v.timestamp = time_from_json(require(j, "timestamp"));
    return v;
  }
  if (type == "dsr_result") {
    DsrResult v;
    v.status = require(j, "status").get<std::string>() == "fulfilled"
                   ? DsrResultStatus::fulfilled
                   : DsrResultStatus::declined;
    if (j.contains("payload")) v.payload = j["payload"];
    return v;
  }
  throw ConfigError("unknown message type '" + type + "'");
}

/// Every actor-to-actor request travels in an envelope; the request id lives
/// outside the message body so bodies stay comparable across requesters and
/// idempotency can key on the id alone. Replies are bare messages.
struct Envelope {
  std::string request_id;
  ProtocolMessage message;
};

inline Json envelope_to_json(const Envelope& e) {
  return Json{{"request_id", e.request_id},
              {"message", message_to_json(e.message)}};
}

inline Envelope envelope_from_json(const Json& j,
                                   const AttributeRegistry& registry) {
  return Envelope{require(j, "request_id").get<std::string>(),
                  message_from_json(require(j, "message"), registry)};
}

// ---------------------------------------------------------------------------
// Flow state
// ---------------------------------------------------------------------------

enum class Phase {
  idle,
  awaiting_credentials,
  awaiting_verification,
  awaiting_idp,
  done
};

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::awaiting_credentials: return "awaiting_credentials";
    case Phase::awaiting_verification: return "awaiting_verification";
    case Phase::awaiting_idp: return "awaiting_idp";
    case Phase::done: return "done";
  }
  return "?";
}

/// Per-request state at the service provider. Phases only ever advance; a
/// message that arrives in the wrong phase is dropped (NonceMismatch), which
/// is what makes replays of completed flows inert.
struct SpSession {
  Phase phase = Phase::idle;
  std::string request_id;
  DsrType dsr_type = DsrType::access;
  Scope scope = Scope::everything();
  Flow flow = Flow::ssi;
  std::optional<std::string> ds_handle;
  Nonce16 nonce{};
  DisclosureMode mode = DisclosureMode::cleartext;
  AuthDecision decision;  // local matching outcome (SSI)
  std::optional<Verdict> final_verdict;
};

// ---------------------------------------------------------------------------
// Service provider
// ---------------------------------------------------------------------------

struct SpConfig {
  std::string sp_id;
  DisclosureMode mode = DisclosureMode::cleartext;
};

/// Open a flow. SSI: answer with a challenge whose `requested` list is the
/// full store catalog regardless of scope. FIM: pool the values present in
/// the scoped data sets and ask the identity provider to map them onto the
/// wallet behind the handle.
inline std::variant<CredentialRequest, FimVerificationRequest>
sp_handle_dsr_request(SpSession& session, const std::string& request_id,
                      const DsrRequest& msg, const Store& store,
                      const MatchPolicy& policy, const SpConfig& cfg,
                      Rng& rng) {
  if (session.phase != Phase::idle)
    throw NonceMismatch("request id already in flight");
  auto scoped = store.candidate_records(msg.scope);  // validates scope ids
  session.request_id = request_id;
  session.dsr_type = msg.dsr_type;
  session.scope = msg.scope;
  session.flow = msg.flow;
  session.mode = cfg.mode;

  if (msg.flow == Flow::ssi) {
    session.nonce = rng.bytes<16>();
    session.phase = Phase::awaiting_credentials;
    CredentialRequest out;
    out.nonce = session.nonce;
    out.mode = cfg.mode;
    out.sp_id = cfg.sp_id;
    for (const auto& id : store.attribute_catalog())  // full catalog, always
      out.requested.push_back(store.registry().get(id));
    return out;
  }

  if (!msg.ds_handle)
    throw UnknownHandle("mediated request without a ds_handle");
  session.ds_handle = msg.ds_handle;
  session.phase = Phase::awaiting_idp;
  FimVerificationRequest out;
  out.sp_id = cfg.sp_id;
  out.ds_handle = *msg.ds_handle;
  out.policy = policy;
  out.sensitivity = store.scope_sensitivity(msg.scope);
  std::map<AttributeId, AttributeType> required;
  for (const DataRecord* r : scoped) {
    for (const auto& f : r->fields) {
      if (!f.attr) continue;
      required.emplace(f.attr->id, *f.attr);
      std::string canonical;
      if (f.canonical) {
        canonical = *f.canonical;
      } else {
        try {
          canonical = canonicalize(*f.attr, f.raw).text;
        } catch (const UnparseableValue&) {
          continue;  // the type is still present; the value is unusable
        }
      }
      out.candidate_values[f.attr->id].insert(std::move(canonical));
    }
  }
  for (const auto& [id, t] : required) out.required.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Wallet
// ---------------------------------------------------------------------------

/// The wallet operator's answer to a challenge: either a refusal of the whole
/// exchange or the subset of attribute ids approved for disclosure.
struct Consent {
  bool denied = false;
  std::set<AttributeId> approved;
};

/// Build the response presentation. Attributes outside the consent set are
/// blanked to Absent slots; nothing about them leaves the device. A refusal
/// (or an empty approval set) aborts locally with no message at all.
inline CredentialResponse wallet_handle_credential_request(
    const CredentialRequest& msg, const CredentialBundle& bundle,
    const Consent& consent, UtcTime now) {
  if (consent.denied || consent.approved.empty())
    throw ConsentDenied("wallet operator declined the exchange");
  std::vector<AttributeId> requested;
  for (const auto& t : msg.requested) requested.push_back(t.id);
  Presentation p = build_presentation(bundle, requested, msg.mode, msg.nonce,
                                      UseCase::dsr, now);
  for (auto& slot : p.slots) {
    if (consent.approved.count(slot.attr.id)) continue;
    PresentationSlot blank;
    blank.attr = slot.attr;
    slot = blank;
  }
  return CredentialResponse{std::move(p)};
}

inline DsrRequest wallet_build_fim_request(DsrType type, const Scope& scope,
                                           const std::string& ds_handle) {
  DsrRequest out;
  out.dsr_type = type;
  out.scope = scope;
  out.flow = Flow::fim;
  out.ds_handle = ds_handle;
  return out;
}

/// Initiation over the identity provider: the request is forwarded to the
/// service provider unchanged; the provider only vouches that it knows the
/// handle.
inline const Envelope& idp_forward_initiation(const Envelope& env,
                                              bool handle_registered) {
  const auto* req = std::get_if<DsrRequest>(&env.message);
  if (!req || req->flow != Flow::fim || !req->ds_handle)
    throw ConfigError("initiation must be a mediated dsr_request");
  if (!handle_registered)
    throw UnknownHandle("no wallet registered for this handle");
  return env;
}

// ---------------------------------------------------------------------------
// Service provider, continued
// ---------------------------------------------------------------------------

/// Receive the wallet's presentation. The nonce must be the one issued for
/// this request and the mode the one asked for; anything else is dropped
/// without state change. Matching runs locally first -- a presentation that
/// matches nothing is never forwarded to the identity provider.
inline std::optional<VerificationRequest> sp_handle_credential_response(
    SpSession& session, const CredentialResponse& msg, const Store& store,
    const MatchPolicy& policy, UtcTime now) {
  if (session.phase != Phase::awaiting_credentials)
    throw NonceMismatch("no credential exchange in flight");
  const Presentation& p = msg.presentation;
  if (p.nonce != session.nonce)
    throw NonceMismatch("presentation bound to a different nonce");
  if (p.mode != session.mode)
    throw ModeMismatch("presentation mode differs from the challenge");

  auto candidates = store.candidate_records(session.scope);
  DisclosedClaims claims = DisclosedClaims::from_presentation(p);
  MatchContext ctx{now.date()};
  session.decision = match_records(claims, candidates, policy,
                                   store.scope_sensitivity(session.scope),
                                   ctx);
  if (session.decision.verdict == Verdict::decline) {
    session.phase = Phase::done;
    session.final_verdict = Verdict::decline;
    return std::nullopt;
  }

  session.phase = Phase::awaiting_verification;
  VerificationRequest out;
  out.presentation = p;
  if (p.mode == DisclosureMode::hashed) {
    // Reveal stored canonical values for exactly the attributes that matched
    // on some matched record. Tag equality means these equal the claimed
    // values, so nothing beyond the match is exposed.
    std::set<AttributeId> disclosed_attrs;
    for (const auto& slot : p.slots)
      if (slot.disclosed) disclosed_attrs.insert(slot.attr.id);
    for (const auto& handle : session.decision.matched_records) {
      const DataRecord* rec = nullptr;
      for (const DataRecord* r : candidates)
        if (r->dataset_id == handle.dataset_id &&
            r->record_id == handle.record_id)
          rec = r;
      if (!rec) continue;
      PerRecordScore s = score_match(claims, *rec, policy, ctx);
      for (const auto& id : s.matched_attrs) {
        if (!disclosed_attrs.count(id)) continue;
        if (out.revealed_values.count(id)) continue;
        const DataField* f = rec->typed_field(id);
        if (!f) continue;
        if (f->canonical) {
          out.revealed_values[id] = *f->canonical;
        } else {
          try {
            out.revealed_values[id] = canonicalize(*f->attr, f->raw).text;
          } catch (const UnparseableValue&) {
          }
        }
      }
    }
  }
  return out;
}

/// Close the flow with the verifier's verdict. Accept executes the request
/// over the records the evidence identified; decline resolves the journal
/// entry and answers with a payload-free result.
inline DsrResult sp_finalize(SpSession& session,
                             const VerificationResponse& msg, Store& store,
                             DSRRequestRecord& journal_entry, UtcTime now) {
  if (session.phase != Phase::awaiting_verification &&
      session.phase != Phase::awaiting_idp)
    throw NonceMismatch("no verification in flight");
  session.phase = Phase::done;
  session.final_verdict = msg.verdict;
  if (msg.verdict == Verdict::decline) {
    if (!journal_entry.fulfilled && !journal_entry.declined) {
      journal_entry.declined = true;
      journal_entry.resolved_at = now;
    }
    return DsrResult{DsrResultStatus::declined, std::nullopt};
  }
  std::vector<RecordHandle> matched;
  if (session.flow == Flow::ssi) {
    matched = session.decision.matched_records;
  } else {
    // Mediated flow: the identity provider vouched for the subject; the
    // request executes over the records the subject scoped it to.
    for (const DataRecord* r : store.candidate_records(session.scope))
      matched.push_back(RecordHandle{r->dataset_id, r->record_id});
  }
  DSRResult result = execute_dsr(store, journal_entry, matched, true, now);
  Json payload = result.type == DsrType::access
                     ? Json{{"records", result.exported}}
                     : Json{{"erased", result.erased}};
  return DsrResult{DsrResultStatus::fulfilled, std::move(payload)};
}

// ---------------------------------------------------------------------------
// Identity provider
// ---------------------------------------------------------------------------

/// How the identity provider asks the issuer about a bundle it only knows by
/// its commitment digests.
using IssuerValidity = std::function<ExpirationResult(const Digest32&)>;

/// SSI-side verification: the cryptography and the issuer's validity answer
/// fold into one verdict. Every failure produces the same response value; the
/// byte encoding never says which check failed.
inline VerificationResponse idp_handle_verification(
    const VerificationRequest& msg, const PublicKey& issuer_key,
    const IssuerValidity& issuer_validity, UtcTime now) {
  VerificationOutcome outcome = verify_presentation(
      msg.presentation, issuer_key, now, msg.revealed_values);
  if (outcome.verdict != Verdict::accept)
    return VerificationResponse{Verdict::decline};
  ExpirationResult validity =
      issuer_validity(bundle_fingerprint(msg.presentation.digests));
  if (validity.status != ExpirationStatus::valid)
    return VerificationResponse{Verdict::decline};
  return VerificationResponse{Verdict::accept};
}

/// FIM-side verification: map the registered wallet onto the candidate
/// values under the provider's declared policy. The notification is emitted
/// whenever the handle is known -- on declines too, so the wallet holder sees
/// failed probes. An unknown handle cannot be notified and declines opaquely.
inline std::pair<std::optional<DeviceNotification>, VerificationResponse>
idp_handle_fim_request(const FimVerificationRequest& msg,
                       const CredentialBundle* registered,
                       const IssuerValidity& issuer_validity, UtcTime now) {
  if (registered == nullptr)
    return {std::nullopt, VerificationResponse{Verdict::decline}};

  DeviceNotification note;
  note.sp_id = msg.sp_id;
  for (const auto& t : msg.required) note.required_types.push_back(t.id);
  note.timestamp = now;

  ExpirationResult validity =
      issuer_validity(bundle_fingerprint(*registered));
  if (validity.status != ExpirationStatus::valid || now < registered->valid_from ||
      now > registered->valid_until)
    return {note, VerificationResponse{Verdict::decline}};

  // The candidate pool becomes one pseudo-record: one field per stored value,
  // so "some value in the set matches" is exactly first-match-per-attribute.
  DataRecord pool;
  pool.dataset_id = msg.sp_id;
  pool.record_id = "candidates";
  std::map<AttributeId, AttributeType> types;
  for (const auto& t : msg.required) types.emplace(t.id, t);
  for (const auto& [id, values] : msg.candidate_values) {
    auto it = types.find(id);
    AttributeType t = it != types.end()
                          ? it->second
                          : AttributeType{id, AttrKind::text, false};
    for (const auto& value : values) {
      DataField f;
      f.attr = t;
      f.label = id;
      f.raw = value;
      f.canonical = value;
      f.derived = id.rfind("derived.", 0) == 0;
      pool.fields.push_back(std::move(f));
    }
  }

  std::vector<std::pair<AttributeType, std::string>> held;
  for (const auto& a : registered->attributes)
    if (use_case_allowed(UseCase::dsr, a.restrictions))
      held.emplace_back(a.attr, a.value.text);
  DisclosedClaims claims = DisclosedClaims::from_values(
      DisclosureMode::cleartext, Nonce16{}, held);
  AuthDecision decision =
      match_records(claims, {&pool}, msg.policy, msg.sensitivity,
                    MatchContext{now.date()});
  return {note, VerificationResponse{decision.verdict}};
}

}  // namespace dsra
