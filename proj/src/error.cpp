#include "eaas/error.hpp"

namespace eaas {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedMessage: return "malformed";
    case Errc::FieldOutOfRange: return "out-of-range";
    case Errc::InvalidKey: return "invalid-key";
    case Errc::RngFailure: return "rng-failure";
    case Errc::UnwrapFailure: return "unwrap-failure";
    case Errc::OpenFailure: return "open-failure";
    case Errc::DuplicateSourceId: return "duplicate-source-id";
    case Errc::EntropyDepleted: return "entropy-depleted";
    case Errc::NoSources: return "no-sources";
    case Errc::InsufficientCredit: return "insufficient-credit";
    case Errc::BlockTooShort: return "block-too-short";
    case Errc::UnknownCommand: return "unknown-command";
    case Errc::DecryptFailure: return "decrypt-failure";
    case Errc::BadSignature: return "bad-signature";
    case Errc::HintMismatch: return "hint-mismatch";
    case Errc::BindFailure: return "bind-failure";
    case Errc::KeyLoadFailure: return "key-load-failure";
    case Errc::ConfigError: return "config-error";
    case Errc::StoreCorrupt: return "store-corrupt";
    case Errc::MissingServerKey: return "missing-server-key";
    case Errc::ServerKeyConflict: return "server-key-conflict";
    case Errc::BadServerSignature: return "bad-server-signature";
    case Errc::WrongQuantity: return "wrong-quantity";
    case Errc::Stale: return "stale";
    case Errc::ClockSkew: return "clock-skew";
    case Errc::Transport: return "transport";
    case Errc::Throttled: return "throttled";
    case Errc::ServerRejected: return "server-rejected";
    case Errc::InputTooShort: return "input-too-short";
    case Errc::Io: return "io";
    case Errc::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace eaas
