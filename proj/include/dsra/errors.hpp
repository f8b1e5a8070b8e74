// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsra {

/// Base error for the library. `code()` is a stable machine-readable
/// identifier; the what() string carries human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define DSRA_DEFINE_ERROR(Name, code_str)                      \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& detail = std::string())   \
        : Error(code_str, detail) {}                           \
  }

DSRA_DEFINE_ERROR(UnparseableValue, "unparseable_value");
DSRA_DEFINE_ERROR(MissingMandatoryAttribute, "missing_mandatory_attribute");
DSRA_DEFINE_ERROR(MandatoryRemoval, "mandatory_removal");
DSRA_DEFINE_ERROR(UnknownAttribute, "unknown_attribute");
DSRA_DEFINE_ERROR(ExpiredBundle, "expired_bundle");
DSRA_DEFINE_ERROR(EmptySource, "empty_source");
DSRA_DEFINE_ERROR(MappingMismatch, "mapping_mismatch");
DSRA_DEFINE_ERROR(UnknownScopeId, "unknown_scope_id");
DSRA_DEFINE_ERROR(UnauthorizedExecution, "unauthorized_execution");
DSRA_DEFINE_ERROR(ModeMismatch, "mode_mismatch");
DSRA_DEFINE_ERROR(NonceMismatch, "nonce_mismatch");
DSRA_DEFINE_ERROR(ConsentDenied, "consent_denied");
DSRA_DEFINE_ERROR(ConsentTimeout, "consent_timeout");
DSRA_DEFINE_ERROR(UnknownHandle, "unknown_handle");
DSRA_DEFINE_ERROR(UnknownPerson, "unknown_person");
DSRA_DEFINE_ERROR(UnknownBundle, "unknown_bundle");
DSRA_DEFINE_ERROR(InvalidBundle, "invalid_bundle");
DSRA_DEFINE_ERROR(BundleExpired, "expired");
DSRA_DEFINE_ERROR(BindFailure, "bind_failure");
DSRA_DEFINE_ERROR(CorruptState, "corrupt_state");
DSRA_DEFINE_ERROR(FixtureMissing, "fixture_missing");
DSRA_DEFINE_ERROR(ScaleExceeded, "scale_exceeded");
DSRA_DEFINE_ERROR(ConfigError, "config_error");
DSRA_DEFINE_ERROR(AssertionFailure, "assertion_failure");

#undef DSRA_DEFINE_ERROR

}  // namespace dsra
