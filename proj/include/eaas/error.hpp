#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eaas {

// Every failure the library reports is one of these codes. Verification
// outcomes that are ordinary values (signature reject, quote reject) are not
// errors and never throw.
enum class Errc {
  MalformedMessage,
  FieldOutOfRange,
  InvalidKey,
  RngFailure,
  UnwrapFailure,
  OpenFailure,
  DuplicateSourceId,
  EntropyDepleted,
  NoSources,
  InsufficientCredit,
  BlockTooShort,
  UnknownCommand,
  DecryptFailure,
  BadSignature,
  HintMismatch,
  BindFailure,
  KeyLoadFailure,
  ConfigError,
  StoreCorrupt,
  MissingServerKey,
  ServerKeyConflict,
  BadServerSignature,
  WrongQuantity,
  Stale,
  ClockSkew,
  Transport,
  Throttled,
  ServerRejected,
  InputTooShort,
  Io,
  Internal,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace eaas
