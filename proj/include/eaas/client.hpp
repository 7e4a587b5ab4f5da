#pragma once

// Client SDK for constrained devices: provisioning, request construction and
// the response checks (quantity, freshness, TES signature).

#include <cstdint>
#include <filesystem>
#include <optional>

#include "eaas/bytes.hpp"
#include "eaas/clock.hpp"
#include "eaas/crypto.hpp"
#include "eaas/error.hpp"
#include "eaas/http.hpp"
#include "eaas/random.hpp"
#include "eaas/wire.hpp"

namespace eaas::client {

inline constexpr std::string_view kClientKeyFile = "client_key.der";
inline constexpr std::string_view kServerKeyFile = "server_pub.der";

struct ClientIdentity {
  crypto::KeyPair keypair;
  crypto::PublicKey server_key;  // pinned pk_TES
  std::filesystem::path store;

  wire::Fingerprint fingerprint() const { return wire::fingerprint(keypair.public_der()); }
};

// Generates the device key on first use and pins the server key. Idempotent:
// an existing store is loaded, never regenerated.
// Throws Error{StoreCorrupt}, Error{MissingServerKey} or Error{ServerKeyConflict}.
ClientIdentity provision(const std::filesystem::path& store,
                         const std::optional<std::filesystem::path>& server_key_file, RandomSource& rng);

// Loads an existing store without creating anything.
ClientIdentity load_identity(const std::filesystem::path& store);

struct PreparedRequest {
  wire::Fingerprint hint;
  Bytes envelope;
  std::uint64_t t1 = 0;  // stays on the device
  std::uint32_t delta_s = 0;

  Bytes body() const { return wire::encode_entropy_post({hint, envelope}); }
};

// sigma1 = sign(sk, "EAAS-REQ-V1", pk_DER || delta_s_be32).
wire::EntropyRequest make_signed_request(const crypto::KeyPair& key, std::uint32_t delta_s, RandomSource& rng);

// Hybrid-encrypts an encoded request under the server key (fresh session key).
Bytes seal_request(ByteView encoded_request, const crypto::PublicKey& server_key, RandomSource& rng);

// Throws Error{FieldOutOfRange} unless 1 <= delta_s <= max_delta_s.
PreparedRequest build_request(const ClientIdentity& identity, std::uint32_t delta_s, Clock& clock, RandomSource& rng,
                              std::uint32_t max_delta_s = wire::kDefaultMaxDeltaS);

struct VerifyOptions {
  std::optional<std::uint64_t> now_ms;  // enables the future-skew check
  std::uint64_t max_future_skew_ms = 30'000;
};

// Checks, in order: sigma2, key unwrap, payload authentication, |S| == delta_s,
// t2 > t1, and t2 <= now + skew. Returns S only if all pass.
// Throws Error{BadServerSignature | UnwrapFailure | OpenFailure | MalformedMessage |
// WrongQuantity | Stale | ClockSkew}.
Bytes verify_response(ByteView envelope, std::uint64_t t1, std::uint32_t delta_s, const crypto::PublicKey& server_key,
                      const crypto::KeyPair& identity, const VerifyOptions& options = {});

struct FetchOptions {
  std::uint32_t max_attempts = 3;
  std::uint64_t max_backoff_s = 60;
  std::uint32_t max_delta_s = wire::kDefaultMaxDeltaS;
  std::uint64_t max_future_skew_ms = 30'000;
};

struct FetchResult {
  Bytes entropy;
  std::uint32_t attempts = 0;
};

// build -> POST -> verify. Retries on 429 (after Retry-After) and on transport
// errors, never on verification failures or other server rejections.
FetchResult request_entropy(const ClientIdentity& identity, Transport& transport, std::uint32_t delta_s, Clock& clock,
                            RandomSource& rng, const FetchOptions& options = {});

// Maps a server error code ("bad-signature", ...) to the matching Errc.
Errc errc_for_server_code(std::string_view code);

enum class QuoteReject { Signature, Nonce, Measurement };

std::string_view to_string(QuoteReject r);

struct QuoteVerdict {
  bool accepted = false;
  std::optional<QuoteReject> reason;
};

// Signature first, then nonce echo, then measurements.
QuoteVerdict verify_quote(const wire::AttestationQuote& quote, ByteView nonce, ByteView expected_sm,
                          ByteView expected_ta, const crypto::PublicKey& attestation_key);

}  // namespace eaas::client
