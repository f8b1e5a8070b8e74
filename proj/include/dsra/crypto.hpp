// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string_view>

#include <openssl/evp.h>

#include "dsra/bytes.hpp"
#include "dsra/rng.hpp"

namespace dsra {

/// SHA-256, the project-wide 256-bit hash behind commitments, match tags and
/// bundle fingerprints.
inline Digest32 sha256(std::span<const std::uint8_t> msg) {
  Digest32 out;
  unsigned int len = 0;
  if (EVP_Digest(msg.data(), msg.size(), out.data.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != 32)
    throw std::runtime_error("sha256: digest failed");
  return out;
}

inline Digest32 sha256(const Bytes& msg) {
  return sha256(std::span<const std::uint8_t>(msg.data(), msg.size()));
}

inline Digest32 sha256(std::string_view msg) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()));
}

using PublicKey = FixedBytes<32>;
using SecretSeed = FixedBytes<32>;
using Signature = FixedBytes<64>;

struct KeyPair {
  SecretSeed secret;
  PublicKey public_key;
};

namespace detail {
struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct CtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using CtxPtr = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;
}  // namespace detail

/// Ed25519 signatures: deterministic, 32-byte public keys, 64-byte
/// signatures. This is the one pluggable signature scheme shipped; everything
/// above it treats keys and signatures as opaque byte strings.
namespace ed25519 {

inline KeyPair keygen(Rng& rng) {
  KeyPair kp;
  kp.secret = rng.bytes<32>();
  detail::PkeyPtr pkey(EVP_PKEY_new_raw_private_key(
      EVP_PKEY_ED25519, nullptr, kp.secret.data.data(), 32));
  if (!pkey) throw std::runtime_error("ed25519: keygen failed");
  std::size_t len = 32;
  if (EVP_PKEY_get_raw_public_key(pkey.get(), kp.public_key.data.data(),
                                  &len) != 1 ||
      len != 32)
    throw std::runtime_error("ed25519: public key extraction failed");
  return kp;
}

inline PublicKey public_of(const SecretSeed& secret) {
  detail::PkeyPtr pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                                    secret.data.data(), 32));
  if (!pkey) throw std::runtime_error("ed25519: bad secret seed");
  PublicKey pub;
  std::size_t len = 32;
  if (EVP_PKEY_get_raw_public_key(pkey.get(), pub.data.data(), &len) != 1 ||
      len != 32)
    throw std::runtime_error("ed25519: public key extraction failed");
  return pub;
}

inline Signature sign(const SecretSeed& secret,
                      std::span<const std::uint8_t> msg) {
  detail::PkeyPtr pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                                    secret.data.data(), 32));
  if (!pkey) throw std::runtime_error("ed25519: bad secret seed");
  detail::CtxPtr ctx(EVP_MD_CTX_new());
  Signature sig;
  std::size_t len = 64;
  if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) !=
          1 ||
      EVP_DigestSign(ctx.get(), sig.data.data(), &len, msg.data(),
                     msg.size()) != 1 ||
      len != 64)
    throw std::runtime_error("ed25519: sign failed");
  return sig;
}

inline bool verify(const PublicKey& pub, std::span<const std::uint8_t> msg,
                   const Signature& sig) {
  detail::PkeyPtr pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr,
                                                   pub.data.data(), 32));
  if (!pkey) return false;
  detail::CtxPtr ctx(EVP_MD_CTX_new());
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr,
                           pkey.get()) != 1)
    return false;
  return EVP_DigestVerify(ctx.get(), sig.data.data(), 64, msg.data(),
                          msg.size()) == 1;
}

inline Signature sign(const SecretSeed& secret, std::string_view msg) {
  return sign(secret, std::span<const std::uint8_t>(
                          reinterpret_cast<const std::uint8_t*>(msg.data()),
                          msg.size()));
}

inline bool verify(const PublicKey& pub, std::string_view msg,
                   const Signature& sig) {
  return verify(pub,
                std::span<const std::uint8_t>(
                    reinterpret_cast<const std::uint8_t*>(msg.data()),
                    msg.size()),
                sig);
}

}  // namespace ed25519
}  // namespace dsra
