// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/crypto.hpp"
#include "dsra/errors.hpp"
#include "dsra/jsoncanon.hpp"
#include "dsra/rng.hpp"
#include "dsra/time.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Use cases
// ---------------------------------------------------------------------------

enum class UseCase { dsr, login, age_proof, any };

inline std::string_view use_case_name(UseCase u) {
  switch (u) {
    case UseCase::dsr: return "dsr";
    case UseCase::login: return "login";
    case UseCase::age_proof: return "age_proof";
    case UseCase::any: return "any";
  }
  return "?";
}

inline UseCase use_case_parse(std::string_view s) {
  if (s == "dsr") return UseCase::dsr;
  if (s == "login") return UseCase::login;
  if (s == "age_proof") return UseCase::age_proof;
  if (s == "any") return UseCase::any;
  throw InvalidBundle("bad use case '" + std::string(s) + "'");
}

using UseCaseSet = std::set<UseCase>;

inline bool use_case_allowed(UseCase wanted, const UseCaseSet& restrictions) {
  return restrictions.count(UseCase::any) > 0 ||
         restrictions.count(wanted) > 0;
}

// ---------------------------------------------------------------------------
// Credential bundle
// ---------------------------------------------------------------------------

struct BundleAttribute {
  AttributeType attr;
  CanonicalValue value;
  Salt16 salt;
  Commitment commitment;
  UseCaseSet restrictions{UseCase::any};
};

/// An issued eID instance held by the wallet. The signature covers the
/// canonical serialization of (issuer_id, sorted commitment digests, validity
/// window); attribute values themselves stay out of the signed payload so a
/// presentation can re-verify it while withholding undisclosed values.
struct CredentialBundle {
  BundleId bundle_id;  // wallet-local; never leaves the wallet
  std::string issuer_id;
  std::vector<BundleAttribute> attributes;  // sorted by attribute id
  UtcTime valid_from;
  UtcTime valid_until;
  Signature signature;

  const BundleAttribute* find(const AttributeId& id) const {
    for (const auto& a : attributes)
      if (a.attr.id == id) return &a;
    return nullptr;
  }

  std::vector<Digest32> sorted_digests() const {
    std::vector<Digest32> out;
    out.reserve(attributes.size());
    for (const auto& a : attributes) out.push_back(a.commitment.digest);
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline std::string bundle_signing_payload(
    const std::string& issuer_id, const std::vector<Digest32>& sorted_digests,
    UtcTime valid_from, UtcTime valid_until) {
  Json digests = Json::array();
  for (const auto& d : sorted_digests) digests.push_back(b64url(d));
  Json payload{{"digests", digests},
               {"issuer_id", issuer_id},
               {"valid_from", valid_from.iso()},
               {"valid_until", valid_until.iso()}};
  return canonical_dump(payload);
}

/// Digest-list fingerprint: how the issuer indexes an issued bundle without
/// a wallet identifier. Two presentations of one bundle share it; that is
/// the documented linkability boundary of this scheme.
inline Digest32 bundle_fingerprint(const std::vector<Digest32>& sorted) {
  Bytes msg;
  append_str(msg, "dsra.bundlefp.v1");
  msg.push_back(0x00);
  for (const auto& d : sorted) append_bytes(msg, d.span());
  return sha256(msg);
}

inline Digest32 bundle_fingerprint(const CredentialBundle& b) {
  return bundle_fingerprint(b.sorted_digests());
}

// ---------------------------------------------------------------------------
// Issuance and catalog negotiation
// ---------------------------------------------------------------------------

inline CredentialBundle issue_bundle(
    const std::map<AttributeId, std::string>& registry_record,
    const std::vector<AttributeId>& selection, UtcTime valid_from,
    UtcTime valid_until, const std::string& issuer_id,
    const SecretSeed& issuer_secret, const AttributeRegistry& registry,
    Rng& rng) {
  if (valid_from >= valid_until)
    throw InvalidBundle("validity window is empty");
  for (const auto& must : mandatory_pid_attributes()) {
    if (std::find(selection.begin(), selection.end(), must) ==
        selection.end())
      throw MissingMandatoryAttribute(must);
  }
  CredentialBundle bundle;
  bundle.bundle_id = rng.bytes<16>();
  bundle.issuer_id = issuer_id;
  bundle.valid_from = valid_from;
  bundle.valid_until = valid_until;

  std::vector<AttributeId> ordered = selection;
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  for (const auto& id : ordered) {
    auto rec = registry_record.find(id);
    if (rec == registry_record.end())
      throw UnknownAttribute("registry record lacks '" + id + "'");
    const AttributeType& attr = registry.get(id);
    BundleAttribute ba;
    ba.attr = attr;
    ba.value = canonicalize(attr, rec->second);
    ba.salt = rng.bytes<16>();
    ba.commitment = commit(attr, ba.value, ba.salt);
    bundle.attributes.push_back(std::move(ba));
  }
  bundle.signature = ed25519::sign(
      issuer_secret, bundle_signing_payload(issuer_id, bundle.sorted_digests(),
                                            valid_from, valid_until));
  return bundle;
}

struct AddAttr {
  AttributeId id;
  std::string raw;
};
struct RemoveAttr {
  AttributeId id;
};
struct Restrict {
  AttributeId id;
  UseCaseSet use_cases;
};
using CatalogChange = std::variant<AddAttr, RemoveAttr, Restrict>;

/// Apply add/remove/restrict changes and re-sign. The bundle id is preserved
/// (it is the issuer's maintenance handle); commitments of unchanged
/// attributes are preserved too.
inline CredentialBundle negotiate_catalog(
    const CredentialBundle& bundle, const std::vector<CatalogChange>& changes,
    const std::set<AttributeId>& issuable, const SecretSeed& issuer_secret,
    const AttributeRegistry& registry, Rng& rng) {
  CredentialBundle next = bundle;
  auto find_mut = [&next](const AttributeId& id) -> BundleAttribute* {
    for (auto& a : next.attributes)
      if (a.attr.id == id) return &a;
    return nullptr;
  };
  for (const auto& change : changes) {
    if (const auto* add = std::get_if<AddAttr>(&change)) {
      if (!issuable.count(add->id))
        throw UnknownAttribute("issuer cannot attest '" + add->id + "'");
      const AttributeType& attr = registry.get(add->id);
      BundleAttribute ba;
      ba.attr = attr;
      ba.value = canonicalize(attr, add->raw);
      ba.salt = rng.bytes<16>();
      ba.commitment = commit(attr, ba.value, ba.salt);
      if (auto* existing = find_mut(add->id))
        *existing = std::move(ba);
      else
        next.attributes.push_back(std::move(ba));
    } else if (const auto* rem = std::get_if<RemoveAttr>(&change)) {
      auto& mandatory = mandatory_pid_attributes();
      if (std::find(mandatory.begin(), mandatory.end(), rem->id) !=
          mandatory.end())
        throw MandatoryRemoval(rem->id);
      if (!find_mut(rem->id))
        throw UnknownAttribute("bundle holds no '" + rem->id + "'");
      std::erase_if(next.attributes, [&](const BundleAttribute& a) {
        return a.attr.id == rem->id;
      });
    } else if (const auto* res = std::get_if<Restrict>(&change)) {
      auto* existing = find_mut(res->id);
      if (!existing)
        throw UnknownAttribute("bundle holds no '" + res->id + "'");
      if (res->use_cases.empty())
        throw InvalidBundle("empty restriction set");
      existing->restrictions = res->use_cases;
    }
  }
  std::sort(next.attributes.begin(), next.attributes.end(),
            [](const BundleAttribute& a, const BundleAttribute& b) {
              return a.attr.id < b.attr.id;
            });
  next.signature = ed25519::sign(
      issuer_secret,
      bundle_signing_payload(next.issuer_id, next.sorted_digests(),
                             next.valid_from, next.valid_until));
  return next;
}

// ---------------------------------------------------------------------------
// Presentations
// ---------------------------------------------------------------------------

enum class DisclosureMode { cleartext, hashed };

inline std::string_view disclosure_mode_name(DisclosureMode m) {
  return m == DisclosureMode::cleartext ? "cleartext" : "hashed";
}

inline DisclosureMode disclosure_mode_parse(std::string_view s) {
  if (s == "cleartext") return DisclosureMode::cleartext;
  if (s == "hashed") return DisclosureMode::hashed;
  throw ModeMismatch("bad disclosure mode '" + std::string(s) + "'");
}

/// One slot per requested attribute: either absent, or the disclosure the
/// active mode calls for.
struct PresentationSlot {
  AttributeType attr;
  bool disclosed = false;
  std::optional<std::string> value;  // cleartext mode
  std::optional<MatchTag> tag;       // hashed mode
  Salt16 salt{};
  Digest32 digest{};
};

/// Selective disclosure of a bundle, bound to a request nonce. Carries no
/// bundle id and no wallet identifier; the full sorted digest list plus the
/// issuer signature let a verifier re-check the bundle signature without
/// learning undisclosed values.
struct Presentation {
  DisclosureMode mode = DisclosureMode::cleartext;
  Nonce16 nonce;
  std::string issuer_id;
  UtcTime valid_from;
  UtcTime valid_until;
  std::vector<PresentationSlot> slots;  // ordered as requested
  std::vector<Digest32> digests;        // full sorted commitment digest list
  Signature signature;
};

inline Presentation build_presentation(const CredentialBundle& bundle,
                                       const std::vector<AttributeId>& requested,
                                       DisclosureMode mode, const Nonce16& nonce,
                                       UseCase use_case, UtcTime now) {
  if (now < bundle.valid_from || now > bundle.valid_until)
    throw ExpiredBundle("now " + now.iso() + " outside validity window");
  Presentation p;
  p.mode = mode;
  p.nonce = nonce;
  p.issuer_id = bundle.issuer_id;
  p.valid_from = bundle.valid_from;
  p.valid_until = bundle.valid_until;
  p.digests = bundle.sorted_digests();
  p.signature = bundle.signature;
  for (const auto& id : requested) {
    PresentationSlot slot;
    const BundleAttribute* held = bundle.find(id);
    if (held == nullptr || !use_case_allowed(use_case, held->restrictions)) {
      slot.attr = AttributeType{id, AttrKind::text, false};
      p.slots.push_back(std::move(slot));
      continue;
    }
    slot.attr = held->attr;
    slot.disclosed = true;
    slot.salt = held->salt;
    slot.digest = held->commitment.digest;
    if (mode == DisclosureMode::cleartext)
      slot.value = held->value.text;
    else
      slot.tag = match_tag(nonce, held->attr, held->value);
    p.slots.push_back(std::move(slot));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

enum class Verdict { accept, decline };

inline std::string_view verdict_name(Verdict v) {
  return v == Verdict::accept ? "accept" : "decline";
}

/// Accept or decline, nothing else. Every decline cause collapses into the
/// same value so the encoding leaks nothing about which check failed.
struct VerificationOutcome {
  Verdict verdict = Verdict::decline;

  friend bool operator==(const VerificationOutcome&,
                         const VerificationOutcome&) = default;

  /// The single canonical byte encoding.
  std::string encode() const {
    return canonical_dump(Json{{"verdict", verdict_name(verdict)}});
  }
};

using RevealedValues = std::map<AttributeId, std::string>;

/// Full cryptographic check of a presentation. All failure causes fold into
/// Decline; the outcome is byte-identical whichever check failed.
inline VerificationOutcome verify_presentation(
    const Presentation& p, const PublicKey& issuer_pubkey, UtcTime now,
    const RevealedValues& revealed_values = {}) {
  const VerificationOutcome decline{Verdict::decline};

  if (!std::is_sorted(p.digests.begin(), p.digests.end())) return decline;
  if (std::adjacent_find(p.digests.begin(), p.digests.end()) !=
      p.digests.end())
    return decline;
  if (!ed25519::verify(issuer_pubkey,
                       bundle_signing_payload(p.issuer_id, p.digests,
                                              p.valid_from, p.valid_until),
                       p.signature))
    return decline;
  if (now > p.valid_until) return decline;

  std::set<AttributeId> seen;
  for (const auto& slot : p.slots) {
    if (!slot.disclosed) continue;
    if (!seen.insert(slot.attr.id).second) return decline;
    // Every disclosed commitment must be bound by the signed digest list.
    if (!std::binary_search(p.digests.begin(), p.digests.end(), slot.digest))
      return decline;
    if (p.mode == DisclosureMode::cleartext) {
      if (!slot.value) return decline;
      CanonicalValue v{slot.attr, *slot.value};
      if (commitment_digest(slot.attr, v, slot.salt) != slot.digest)
        return decline;
    } else {
      if (!slot.tag) return decline;
      auto revealed = revealed_values.find(slot.attr.id);
      if (revealed != revealed_values.end()) {
        CanonicalValue v{slot.attr, revealed->second};
        if (commitment_digest(slot.attr, v, slot.salt) != slot.digest)
          return decline;
        if (match_tag(p.nonce, slot.attr, v) != *slot.tag) return decline;
      }
    }
  }
  return {Verdict::accept};
}

// ---------------------------------------------------------------------------
// Expiration oracle (issuer side)
// ---------------------------------------------------------------------------

enum class ExpirationStatus { valid, expired, unknown };

struct ExpirationResult {
  ExpirationStatus status = ExpirationStatus::unknown;
  std::optional<UtcTime> valid_until;
};

/// The Identity Issuer's authoritative record of what it issued. Revocation
/// is modeled as forcing the recorded expiry into the past; there are no
/// revocation lists, only this oracle.
class IssuerLedger {
 public:
  void record_issuance(const CredentialBundle& b) {
    Entry e{b.valid_until, false};
    issued_[b.bundle_id] = e;
    by_fingerprint_[bundle_fingerprint(b)] = b.bundle_id;
  }

  /// Returns false when the bundle is unknown. Revoking twice is a no-op.
  bool revoke(const BundleId& id, UtcTime now) {
    auto it = issued_.find(id);
    if (it == issued_.end()) return false;
    if (!it->second.revoked) {
      it->second.revoked = true;
      it->second.valid_until =
          std::min(it->second.valid_until, now.plus_seconds(-1));
    }
    return true;
  }

  ExpirationResult check_expiration(const BundleId& id, UtcTime now) const {
    auto it = issued_.find(id);
    if (it == issued_.end()) return {ExpirationStatus::unknown, std::nullopt};
    if (now > it->second.valid_until)
      return {ExpirationStatus::expired, it->second.valid_until};
    return {ExpirationStatus::valid, it->second.valid_until};
  }

  ExpirationResult check_fingerprint(const Digest32& fp, UtcTime now) const {
    auto it = by_fingerprint_.find(fp);
    if (it == by_fingerprint_.end())
      return {ExpirationStatus::unknown, std::nullopt};
    return check_expiration(it->second, now);
  }

  bool knows(const BundleId& id) const { return issued_.count(id) > 0; }

  Json to_json() const {
    Json bundles = Json::array();
    for (const auto& [id, e] : issued_) {
      bundles.push_back(Json{{"bundle_id", b64url(id)},
                             {"valid_until", e.valid_until.iso()},
                             {"revoked", e.revoked}});
    }
    Json fps = Json::array();
    for (const auto& [fp, id] : by_fingerprint_)
      fps.push_back(Json{{"fingerprint", b64url(fp)}, {"bundle_id", b64url(id)}});
    return Json{{"bundles", bundles}, {"fingerprints", fps}};
  }

  static IssuerLedger from_json(const Json& j) {
    IssuerLedger ledger;
    for (const auto& b : require(j, "bundles")) {
      Entry e{time_from_json(require(b, "valid_until")),
              require(b, "revoked").get<bool>()};
      ledger.issued_[fixed_from_json<16>(require(b, "bundle_id"))] = e;
    }
    for (const auto& f : require(j, "fingerprints")) {
      ledger.by_fingerprint_[fixed_from_json<32>(require(f, "fingerprint"))] =
          fixed_from_json<16>(require(f, "bundle_id"));
    }
    return ledger;
  }

 private:
  struct Entry {
    UtcTime valid_until;
    bool revoked = false;
  };
  std::map<BundleId, Entry> issued_;
  std::map<Digest32, BundleId> by_fingerprint_;
};

// ---------------------------------------------------------------------------
// JSON round trips
// ---------------------------------------------------------------------------

inline Json use_case_set_to_json(const UseCaseSet& s) {
  Json out = Json::array();
  for (UseCase u : s) out.push_back(std::string(use_case_name(u)));
  return out;
}

inline UseCaseSet use_case_set_from_json(const Json& j) {
  UseCaseSet out;
  for (const auto& u : j) out.insert(use_case_parse(u.get<std::string>()));
  return out;
}

inline Json bundle_to_json(const CredentialBundle& b) {
  Json attrs = Json::array();
  for (const auto& a : b.attributes) {
    attrs.push_back(Json{{"attr", a.attr.id},
                         {"kind", std::string(attr_kind_name(a.attr.kind))},
                         {"sensitive", a.attr.sensitive},
                         {"value", a.value.text},
                         {"salt", b64url(a.salt)},
                         {"digest", b64url(a.commitment.digest)},
                         {"restrictions",
                          use_case_set_to_json(a.restrictions)}});
  }
  return Json{{"type", "credential_bundle"},
              {"bundle_id", b64url(b.bundle_id)},
              {"issuer_id", b.issuer_id},
              {"valid_from", b.valid_from.iso()},
              {"valid_until", b.valid_until.iso()},
              {"attributes", attrs},
              {"signature", b64url(b.signature)}};
}

inline CredentialBundle bundle_from_json(const Json& j) {
  CredentialBundle b;
  b.bundle_id = fixed_from_json<16>(require(j, "bundle_id"));
  b.issuer_id = require(j, "issuer_id").get<std::string>();
  b.valid_from = time_from_json(require(j, "valid_from"));
  b.valid_until = time_from_json(require(j, "valid_until"));
  b.signature = fixed_from_json<64>(require(j, "signature"));
  for (const auto& a : require(j, "attributes")) {
    BundleAttribute ba;
    ba.attr = AttributeType{
        require(a, "attr").get<std::string>(),
        attr_kind_parse(require(a, "kind").get<std::string>()),
        require(a, "sensitive").get<bool>()};
    ba.value = CanonicalValue{ba.attr, require(a, "value").get<std::string>()};
    ba.salt = fixed_from_json<16>(require(a, "salt"));
    ba.commitment =
        Commitment{fixed_from_json<32>(require(a, "digest")), ba.salt};
    ba.restrictions = use_case_set_from_json(require(a, "restrictions"));
    b.attributes.push_back(std::move(ba));
  }
  return b;
}

inline Json presentation_to_json(const Presentation& p) {
  Json digests = Json::array();
  for (const auto& d : p.digests) digests.push_back(b64url(d));
  Json disclosed = Json::array();
  for (const auto& slot : p.slots) {
    if (!slot.disclosed) {
      disclosed.push_back(Json{{"attr", slot.attr.id}, {"status", "absent"}});
      continue;
    }
    Json entry{{"attr", slot.attr.id},
               {"status", "disclosed"},
               {"salt", b64url(slot.salt)},
               {"digest", b64url(slot.digest)}};
    if (slot.value) entry["value"] = *slot.value;
    if (slot.tag) entry["tag"] = b64url(slot.tag->tag);
    disclosed.push_back(std::move(entry));
  }
  return Json{{"mode", std::string(disclosure_mode_name(p.mode))},
              {"nonce", b64url(p.nonce)},
              {"issuer_id", p.issuer_id},
              {"valid_from", p.valid_from.iso()},
              {"valid_until", p.valid_until.iso()},
              {"disclosed", disclosed},
              {"digests", digests},
              {"signature", b64url(p.signature)}};
}

inline Presentation presentation_from_json(const Json& j,
                                           const AttributeRegistry& registry) {
  Presentation p;
  p.mode = disclosure_mode_parse(require(j, "mode").get<std::string>());
  p.nonce = fixed_from_json<16>(require(j, "nonce"));
  p.issuer_id = require(j, "issuer_id").get<std::string>();
  p.valid_from = time_from_json(require(j, "valid_from"));
  p.valid_until = time_from_json(require(j, "valid_until"));
  p.signature = fixed_from_json<64>(require(j, "signature"));
  for (const auto& d : require(j, "digests"))
    p.digests.push_back(fixed_from_json<32>(d));
  for (const auto& s : require(j, "disclosed")) {
    PresentationSlot slot;
    AttributeId id = require(s, "attr").get<std::string>();
    slot.attr = registry.contains(id) ? registry.get(id)
                                      : AttributeType{id, AttrKind::text, false};
    if (require(s, "status").get<std::string>() == "disclosed") {
      slot.disclosed = true;
      slot.salt = fixed_from_json<16>(require(s, "salt"));
      slot.digest = fixed_from_json<32>(require(s, "digest"));
      if (s.contains("value")) slot.value = s["value"].get<std::string>();
      if (s.contains("tag"))
        slot.tag = MatchTag{fixed_from_json<32>(s["tag"])};
    }
    p.slots.push_back(std::move(slot));
  }
  return p;
}

}  // namespace dsra
