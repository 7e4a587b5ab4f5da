#pragma once

// Hybrid public-key envelope: RSA-3072 (PSS-SHA256 signatures, OAEP-SHA256 key
// wrapping) and AES-128-GCM for payloads.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>

#include "eaas/bytes.hpp"
#include "eaas/random.hpp"
#include "eaas/wire.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace eaas::crypto {

inline constexpr unsigned kModulusBits = 3072;
inline constexpr std::size_t kModulusBytes = kModulusBits / 8;
inline constexpr std::size_t kSessionKeySize = 16;
inline constexpr std::size_t kHashSize = 32;
inline constexpr std::size_t kPssSaltSize = 32;
// Largest message OAEP-SHA256 can carry under a 3072-bit key: k - 2*hLen - 2.
inline constexpr std::size_t kOaepCapacity = kModulusBytes - 2 * kHashSize - 2;

inline constexpr std::string_view kRequestTag = "EAAS-REQ-V1";
inline constexpr std::string_view kResponseTag = "EAAS-RESP-V1";
inline constexpr std::string_view kQuoteTag = "EAAS-QUOTE-V1";

namespace detail {
struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const noexcept;
};
}  // namespace detail

class PublicKey {
 public:
  // Accepts SubjectPublicKeyInfo DER; throws Error{InvalidKey} unless it is a
  // 3072-bit RSA key.
  static PublicKey from_der(ByteView der);
  // DER or PEM ("-----BEGIN PUBLIC KEY-----").
  static PublicKey parse(ByteView der_or_pem);

  Bytes to_der() const;
  unsigned bits() const;
  EVP_PKEY* raw() const { return key_.get(); }

 private:
  explicit PublicKey(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {}
  std::shared_ptr<EVP_PKEY> key_;
  friend class KeyPair;
};

class KeyPair {
 public:
  // PKCS#8 or PKCS#1, DER or PEM. Throws Error{InvalidKey}.
  static KeyPair parse(ByteView der_or_pem);

  PublicKey public_key() const { return PublicKey(key_); }
  Bytes public_der() const { return public_key().to_der(); }
  // PKCS#8 DER of the secret key.
  Bytes private_der() const;
  unsigned bits() const;
  EVP_PKEY* raw() const { return key_.get(); }

 private:
  explicit KeyPair(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {}
  std::shared_ptr<EVP_PKEY> key_;
  friend KeyPair generate_keypair(RandomSource& rng);
};

// Fixed-length AES-128 key; wiped on destruction.
class SessionKey {
 public:
  SessionKey() = default;
  explicit SessionKey(ByteView bytes);
  SessionKey(const SessionKey&) = default;
  SessionKey& operator=(const SessionKey&) = default;
  ~SessionKey();

  static SessionKey generate(RandomSource& rng);

  ByteView bytes() const { return view(key_); }
  bool operator==(const SessionKey& other) const { return key_ == other.key_; }

 private:
  std::array<std::uint8_t, kSessionKeySize> key_{};
};

// All randomness (prime candidates) comes from `rng`, so a seeded source
// yields the same key every time.
KeyPair generate_keypair(RandomSource& rng);

// RSA-PSS-SHA256 (salt 32) over tag || msg. Always kModulusBytes long.
Bytes sign(const KeyPair& key, std::string_view tag, ByteView msg, RandomSource& rng);
bool verify(const PublicKey& key, std::string_view tag, ByteView msg, ByteView signature);
// Throws Error{InvalidKey} when `public_key_der` does not parse.
bool verify(ByteView public_key_der, std::string_view tag, ByteView msg, ByteView signature);

// RSA-OAEP-SHA256. Throws Error{UnwrapFailure} for anything that does not
// decrypt to a 16-byte key under `key`.
Bytes wrap_key(const PublicKey& recipient, const SessionKey& session_key, RandomSource& rng);
SessionKey unwrap_key(const KeyPair& key, ByteView wrapped);

// Plain OAEP encryption of an arbitrary message; throws Error{FieldOutOfRange}
// above kOaepCapacity.
Bytes oaep_encrypt(const PublicKey& recipient, ByteView message, RandomSource& rng);

// AES-128-GCM, no associated data. The output is plaintext size + 16.
Bytes seal_payload(const SessionKey& key, const wire::Nonce& nonce, ByteView plaintext);
// Throws Error{OpenFailure} when authentication fails.
Bytes open_payload(const SessionKey& key, const wire::Nonce& nonce, ByteView ciphertext);

// Keys on disk: DER written, DER or PEM accepted on load.
KeyPair load_keypair(const std::filesystem::path& path);
PublicKey load_public_key(const std::filesystem::path& path);
void save_keypair(const KeyPair& key, const std::filesystem::path& path);
void save_public_key(const PublicKey& key, const std::filesystem::path& path);

}  // namespace eaas::crypto
