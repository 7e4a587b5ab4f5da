#pragma once

// Boundary checks shared by the unit tests and the acceptance run.

#include <cstdio>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>

#include "eaas/bytes.hpp"
#include "eaas/crypto.hpp"
#include "eaas/server.hpp"
#include "eaas/trusted_core.hpp"

namespace eaas::test {

// True if `haystack` contains any `window`-byte slice of `secret`.
inline bool shares_window(ByteView haystack, ByteView secret, std::size_t window = 16) {
  if (secret.size() < window) return contains(haystack, secret);
  for (std::size_t i = 0; i + window <= secret.size(); ++i) {
    if (contains(haystack, secret.subspan(i, window))) return true;
  }
  return false;
}

// The private RSA components; the modulus and exponent are public and appear
// in the private key encoding too, so that encoding cannot be scanned whole.
inline std::vector<Bytes> secret_components(const crypto::KeyPair& key) {
  std::vector<Bytes> out;
  for (const char* name : {OSSL_PKEY_PARAM_RSA_D, OSSL_PKEY_PARAM_RSA_FACTOR1, OSSL_PKEY_PARAM_RSA_FACTOR2,
                           OSSL_PKEY_PARAM_RSA_EXPONENT1, OSSL_PKEY_PARAM_RSA_EXPONENT2,
                           OSSL_PKEY_PARAM_RSA_COEFFICIENT1}) {
    BIGNUM* bn = nullptr;
    if (EVP_PKEY_get_bn_param(key.raw(), name, &bn) != 1) continue;
    Bytes b(static_cast<std::size_t>(BN_num_bytes(bn)));
    BN_bn2bin(bn, b.data());
    BN_clear_free(bn);
    out.push_back(std::move(b));
  }
  return out;
}

inline bool leaks_key(ByteView haystack, const crypto::KeyPair& key) {
  for (const auto& part : secret_components(key)) {
    if (shares_window(haystack, part)) return true;
  }
  return false;
}

// Member functions of `cls` defined in the library, without their signatures.
inline std::set<std::string> exported_members(const std::string& cls) {
  std::set<std::string> out;
  const std::string cmd = "nm -C --defined-only '" + std::string(EAAS_LIB_PATH) + "' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return out;
  char line[4096];
  const std::string prefix = cls + "::";
  while (std::fgets(line, sizeof line, pipe)) {
    std::string s(line);
    auto pos = s.find(prefix);
    if (pos == std::string::npos) continue;
    // Only text symbols; skips typeinfo, vtables and static data.
    if (pos < 3 || (s[pos - 2] != 'T' && s[pos - 2] != 'W')) continue;
    auto name = s.substr(pos + prefix.size());
    name = name.substr(0, name.find('('));
    if (name.find("::") != std::string::npos) continue;  // nested types and lambdas
    out.insert(name);
  }
  ::pclose(pipe);
  return out;
}

// Private handlers must not be callable from outside the core.
template <typename T>
concept ExposesHandlers = requires(T& t, ByteView b) { t.handle_request(b); } ||
                          requires(T& t, ByteView b) { t.attest(b); } || requires(T& t) { t.identity_; } ||
                          requires(T& t) { t.pool_; };

template <typename T>
concept ExposesBuffer = requires(T& t) { t.buffered; };

static_assert(!ExposesHandlers<ta::TrustedCore>);
static_assert(!ExposesBuffer<pool::PoolStatus>);
static_assert(std::is_same_v<decltype(std::declval<ta::TrustedCore&>().invoke(std::declval<const ta::TaCommand&>())),
                             ta::TaResult>);
static_assert(std::is_same_v<decltype(std::declval<server::TesService&>().route({}, {}, {})), HttpReply>);

inline const std::set<std::string> kTrustedCoreSurface = {"TrustedCore", "open", "invoke", "handle_request", "attest",
                                                          "pool_status"};
inline const std::set<std::string> kServiceSurface = {"TesService",    "handle_entropy", "handle_attest",
                                                      "handle_pubkey", "route",          "counters",
                                                      "pool_status",   "from_ta"};

}  // namespace eaas::test
