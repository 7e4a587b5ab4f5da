#pragma once

// Binary wire format for every message that crosses the network or the
// trusted/untrusted boundary. All integers are big-endian; every message
// starts with the 4-byte magic "EAAS", a version byte and a type byte.
// PROTOCOL.md documents the layouts with a worked example.

#include <array>
#include <cstdint>
#include <optional>

#include "eaas/bytes.hpp"
#include "eaas/hash.hpp"

namespace eaas::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'E', 'A', 'A', 'S'};
inline constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t { Request = 1, Envelope = 2, Quote = 3 };

inline constexpr std::size_t kSignatureSize = 384;  // RSA-3072
inline constexpr std::size_t kWrappedKeySize = 384;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kFingerprintSize = 32;
inline constexpr std::size_t kMeasurementSize = 32;
inline constexpr std::uint32_t kDefaultMaxDeltaS = 4096;

// version(1) + t2(8) in front of the entropy inside a sealed response.
inline constexpr std::size_t kResponsePayloadHeader = 9;

using Nonce = std::array<std::uint8_t, kNonceSize>;

struct EntropyRequest {
  Bytes client_pub_key;  // SubjectPublicKeyInfo DER
  std::uint32_t delta_s = 0;
  Bytes sigma1;

  bool operator==(const EntropyRequest&) const = default;
};

struct SealedEnvelope {
  Bytes wrapped_key;
  Nonce nonce{};
  Bytes ciphertext;  // includes the GCM tag
  std::optional<Bytes> sigma2;

  bool operator==(const SealedEnvelope&) const = default;
};

struct EntropyResponse {
  std::uint64_t t2 = 0;  // ms since epoch, UTC
  Bytes entropy;

  bool operator==(const EntropyResponse&) const = default;
};

struct Fingerprint {
  std::array<std::uint8_t, kFingerprintSize> id{};

  bool operator==(const Fingerprint&) const = default;
  auto operator<=>(const Fingerprint&) const = default;
};

struct AttestationQuote {
  std::array<std::uint8_t, 32> nonce{};
  std::array<std::uint8_t, kMeasurementSize> sm_measurement{};
  std::array<std::uint8_t, kMeasurementSize> ta_measurement{};
  std::uint64_t quote_time = 0;
  Bytes signature;

  bool operator==(const AttestationQuote&) const = default;
};

// Body of POST /v1/entropy: cleartext fingerprint hint followed by the
// hybrid-encrypted request envelope.
struct EntropyPost {
  Fingerprint hint;
  Bytes envelope;

  bool operator==(const EntropyPost&) const = default;
};

Fingerprint fingerprint(ByteView public_key_der);

Bytes encode_request(const EntropyRequest& req);
EntropyRequest decode_request(ByteView data, std::uint32_t max_delta_s = kDefaultMaxDeltaS);

Bytes encode_envelope(const SealedEnvelope& env);
SealedEnvelope decode_envelope(ByteView data);

Bytes encode_response_payload(const EntropyResponse& resp);
EntropyResponse decode_response_payload(ByteView data);

Bytes encode_quote(const AttestationQuote& quote);
AttestationQuote decode_quote(ByteView data);

Bytes encode_entropy_post(const EntropyPost& post);
// Validates the envelope structure as well; a request envelope must not carry sigma2.
EntropyPost decode_entropy_post(ByteView body);

// Material covered by the signatures (the domain tag is prepended by crypto::sign).
Bytes request_signed_bytes(ByteView public_key_der, std::uint32_t delta_s);
Bytes envelope_signed_bytes(const SealedEnvelope& env);
Bytes quote_signed_bytes(const AttestationQuote& quote);

}  // namespace eaas::wire
