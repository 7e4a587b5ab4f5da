#pragma once

// The simulated Trusted Application. Every operation that touches the TES
// secret key, the entropy pool or client-bound plaintext happens behind
// TrustedCore::invoke, which only exchanges byte strings with its caller.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "eaas/bytes.hpp"
#include "eaas/clock.hpp"
#include "eaas/crypto.hpp"
#include "eaas/hash.hpp"
#include "eaas/pool.hpp"
#include "eaas/random.hpp"
#include "eaas/wire.hpp"

namespace eaas::ta {

// PoolStatus reports counters and source health only, never buffer bytes.
enum class Command : std::uint8_t { GetPubkey = 1, HandleRequest = 2, Attest = 3, PoolStatus = 4 };

enum class Status : std::uint8_t {
  Ok = 0,
  UnknownCommand = 1,
  Malformed = 2,
  DecryptFailure = 3,
  BadSignature = 4,
  HintMismatch = 5,
  FieldOutOfRange = 6,
  EntropyDepleted = 7,
  NoSources = 8,
  Internal = 9,
};

inline constexpr Status kAllStatuses[] = {
    Status::Ok,           Status::UnknownCommand,  Status::Malformed, Status::DecryptFailure, Status::BadSignature,
    Status::HintMismatch, Status::FieldOutOfRange, Status::EntropyDepleted, Status::NoSources, Status::Internal,
};

std::string_view to_string(Status s);

struct TaCommand {
  std::uint8_t command_id = 0;
  Bytes payload;
};

struct TaResult {
  Status status = Status::Internal;
  Bytes payload;  // empty unless status == Ok
};

// HANDLE_REQUEST payload: now_ms u64 || fingerprint hint (32) || request envelope.
Bytes handle_request_payload(std::uint64_t now_ms, const wire::Fingerprint& hint, ByteView envelope);
// ATTEST payload: now_ms u64 || nonce (32).
Bytes attest_payload(std::uint64_t now_ms, ByteView nonce);

inline TaCommand make_command(Command c, Bytes payload = {}) {
  return TaCommand{static_cast<std::uint8_t>(c), std::move(payload)};
}

struct SourceBinding {
  pool::SourceDescriptor descriptor;
  pool::ByteSupplier supplier;
};

struct TaConfig {
  std::uint32_t max_delta_s = wire::kDefaultMaxDeltaS;
  std::chrono::milliseconds harvest_deadline{2000};
  Digest sm_measurement{};
  Digest ta_measurement{};
  pool::PoolOptions pool_options;
};

Bytes encode_pool_status(const pool::PoolStatus& status);
pool::PoolStatus decode_pool_status(ByteView data);

// SHA-256 of a file; the stand-in for boot-time measurement registers.
Digest measure_file(const std::filesystem::path& path);

class TrustedCore {
 public:
  // `clock` drives source rate limits; `rng` supplies nonces, OAEP seeds and
  // PSS salts. Session keys come from the entropy pool.
  TrustedCore(TaConfig config, crypto::KeyPair identity, std::vector<SourceBinding> sources, Clock& clock,
              std::unique_ptr<RandomSource> rng);

  // Loads the identity key from `key_path` inside the trusted side; if the
  // file is absent and `generate_if_missing`, creates and persists one.
  // Throws Error{KeyLoadFailure}.
  static std::unique_ptr<TrustedCore> open(TaConfig config, const std::filesystem::path& key_path,
                                           bool generate_if_missing, std::vector<SourceBinding> sources,
                                           Clock& clock, std::unique_ptr<RandomSource> rng);

  TrustedCore(const TrustedCore&) = delete;
  TrustedCore& operator=(const TrustedCore&) = delete;

  // Serialized: one command executes at a time.
  TaResult invoke(const TaCommand& cmd);

 private:
  TaResult handle_request(ByteView payload);
  TaResult attest(ByteView payload);
  TaResult pool_status(ByteView payload);

  TaConfig config_;
  crypto::KeyPair identity_;
  Bytes identity_public_der_;
  std::unique_ptr<RandomSource> rng_;
  std::unique_ptr<pool::EntropyPool> pool_;
  std::mutex mutex_;
};

}  // namespace eaas::ta
