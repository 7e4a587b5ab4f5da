#include "eaas/crypto.hpp"

#include <openssl/bio.h>
#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include <fstream>
#include <iterator>

#include "eaas/error.hpp"
#include "eaas/hash.hpp"

namespace eaas::crypto {

void detail::PkeyDeleter::operator()(EVP_PKEY* p) const noexcept { EVP_PKEY_free(p); }

namespace {

using BnPtr = std::unique_ptr<BIGNUM, decltype(&BN_clear_free)>;
using BnCtxPtr = std::unique_ptr<BN_CTX, decltype(&BN_CTX_free)>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;
using BioPtr = std::unique_ptr<BIO, decltype(&BIO_free)>;

std::shared_ptr<EVP_PKEY> adopt(EVP_PKEY* p) { return std::shared_ptr<EVP_PKEY>(p, detail::PkeyDeleter{}); }

BnPtr new_bn() {
  BnPtr bn(BN_secure_new(), BN_clear_free);
  if (!bn) throw Error(Errc::Internal, "BN_new");
  return bn;
}

void check(int rc, const char* what) {
  if (rc != 1) throw Error(Errc::Internal, what);
}

bool is_rsa_3072(EVP_PKEY* key) {
  return EVP_PKEY_is_a(key, "RSA") && EVP_PKEY_get_bits(key) == static_cast<int>(kModulusBits);
}

// RFC 8017 B.2.1 with SHA-256.
Bytes mgf1(ByteView seed, std::size_t length) {
  Bytes out;
  out.reserve(length + kHashSize);
  for (std::uint32_t counter = 0; out.size() < length; ++counter) {
    Bytes c;
    put_u32be(c, counter);
    auto block = sha256({seed, c});
    append(out, view(block));
  }
  out.resize(length);
  return out;
}

// m^e mod n or m^d mod n without padding; input must be exactly k bytes and < n.
Bytes raw_rsa(EVP_PKEY* key, ByteView input, bool private_op) {
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, key, nullptr), EVP_PKEY_CTX_free);
  if (!ctx) throw Error(Errc::Internal, "EVP_PKEY_CTX_new");
  int rc = private_op ? EVP_PKEY_decrypt_init(ctx.get()) : EVP_PKEY_encrypt_init(ctx.get());
  check(rc, "raw rsa init");
  check(EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_NO_PADDING), "raw rsa padding");
  Bytes out(kModulusBytes);
  std::size_t out_len = out.size();
  rc = private_op ? EVP_PKEY_decrypt(ctx.get(), out.data(), &out_len, input.data(), input.size())
                  : EVP_PKEY_encrypt(ctx.get(), out.data(), &out_len, input.data(), input.size());
  if (rc != 1) throw Error(Errc::Internal, "raw rsa operation");
  // Left-pad to k bytes.
  if (out_len < kModulusBytes) {
    Bytes padded(kModulusBytes - out_len, 0);
    padded.insert(padded.end(), out.begin(), out.begin() + static_cast<std::ptrdiff_t>(out_len));
    return padded;
  }
  return out;
}

BnPtr random_prime(RandomSource& rng, const BIGNUM* e, BN_CTX* ctx) {
  constexpr std::size_t kPrimeBytes = kModulusBits / 16;
  auto candidate = new_bn();
  auto pm1 = new_bn();
  auto gcd = new_bn();
  for (;;) {
    Bytes buf(kPrimeBytes);
    rng.fill(buf);
    // Top two bits set so p*q has exactly 3072 bits; odd.
    buf[0] |= 0xC0;
    buf[kPrimeBytes - 1] |= 0x01;
    if (!BN_bin2bn(buf.data(), static_cast<int>(buf.size()), candidate.get())) throw Error(Errc::Internal, "bin2bn");
    OPENSSL_cleanse(buf.data(), buf.size());
    // Incremental search from the random start.
    for (int step = 0; step < 4096; ++step) {
      if (BN_num_bits(candidate.get()) != static_cast<int>(kModulusBits / 2)) break;
      int prime = BN_check_prime(candidate.get(), ctx, nullptr);
      if (prime < 0) throw Error(Errc::Internal, "BN_check_prime");
      if (prime == 1) {
        check(BN_sub(pm1.get(), candidate.get(), BN_value_one()), "BN_sub");
        check(BN_gcd(gcd.get(), pm1.get(), e, ctx), "BN_gcd");
        if (BN_is_one(gcd.get())) return candidate;
      }
      check(BN_add_word(candidate.get(), 2), "BN_add_word");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Keys

PublicKey PublicKey::from_der(ByteView der) {
  const unsigned char* p = der.data();
  EVP_PKEY* raw = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
  if (!raw) throw Error(Errc::InvalidKey, "not a SubjectPublicKeyInfo");
  auto key = adopt(raw);
  if (p != der.data() + der.size()) throw Error(Errc::InvalidKey, "trailing bytes after key");
  if (!is_rsa_3072(raw)) throw Error(Errc::InvalidKey, "not an RSA-3072 key");
  return PublicKey(std::move(key));
}

PublicKey PublicKey::parse(ByteView der_or_pem) {
  static constexpr std::string_view kPem = "-----BEGIN";
  std::string_view text(reinterpret_cast<const char*>(der_or_pem.data()), der_or_pem.size());
  if (text.find(kPem) == std::string_view::npos) return from_der(der_or_pem);
  BioPtr bio(BIO_new_mem_buf(der_or_pem.data(), static_cast<int>(der_or_pem.size())), BIO_free);
  EVP_PKEY* raw = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!raw) throw Error(Errc::InvalidKey, "bad PEM public key");
  auto key = adopt(raw);
  if (!is_rsa_3072(raw)) throw Error(Errc::InvalidKey, "not an RSA-3072 key");
  return PublicKey(std::move(key));
}

Bytes PublicKey::to_der() const {
  unsigned char* buf = nullptr;
  int len = i2d_PUBKEY(key_.get(), &buf);
  if (len <= 0) throw Error(Errc::Internal, "i2d_PUBKEY");
  Bytes out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

unsigned PublicKey::bits() const { return static_cast<unsigned>(EVP_PKEY_get_bits(key_.get())); }

KeyPair KeyPair::parse(ByteView der_or_pem) {
  static constexpr std::string_view kPem = "-----BEGIN";
  std::string_view text(reinterpret_cast<const char*>(der_or_pem.data()), der_or_pem.size());
  EVP_PKEY* raw = nullptr;
  if (text.find(kPem) != std::string_view::npos) {
    BioPtr bio(BIO_new_mem_buf(der_or_pem.data(), static_cast<int>(der_or_pem.size())), BIO_free);
    raw = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  } else {
    const unsigned char* p = der_or_pem.data();
    raw = d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der_or_pem.size()));
  }
  if (!raw) throw Error(Errc::InvalidKey, "not a private key");
  auto key = adopt(raw);
  if (!is_rsa_3072(raw)) throw Error(Errc::InvalidKey, "not an RSA-3072 key");
  return KeyPair(std::move(key));
}

Bytes KeyPair::private_der() const {
  BioPtr bio(BIO_new(BIO_s_mem()), BIO_free);
  if (!bio || i2d_PKCS8PrivateKey_bio(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    throw Error(Errc::Internal, "i2d_PKCS8PrivateKey");
  }
  char* data = nullptr;
  long len = BIO_get_mem_data(bio.get(), &data);
  Bytes out(data, data + len);
  OPENSSL_cleanse(data, static_cast<std::size_t>(len));
  return out;
}

unsigned KeyPair::bits() const { return static_cast<unsigned>(EVP_PKEY_get_bits(key_.get())); }

SessionKey::SessionKey(ByteView bytes) {
  if (bytes.size() != kSessionKeySize) throw Error(Errc::FieldOutOfRange, "session key length");
  std::copy(bytes.begin(), bytes.end(), key_.begin());
}

SessionKey::~SessionKey() { OPENSSL_cleanse(key_.data(), key_.size()); }

SessionKey SessionKey::generate(RandomSource& rng) {
  SessionKey k;
  rng.fill(k.key_);
  return k;
}

KeyPair generate_keypair(RandomSource& rng) {
  BnCtxPtr ctx(BN_CTX_secure_new(), BN_CTX_free);
  if (!ctx) throw Error(Errc::Internal, "BN_CTX_new");
  auto e = new_bn();
  check(BN_set_word(e.get(), RSA_F4), "BN_set_word");

  BnPtr p = random_prime(rng, e.get(), ctx.get());
  BnPtr q = random_prime(rng, e.get(), ctx.get());
  while (BN_cmp(p.get(), q.get()) == 0) q = random_prime(rng, e.get(), ctx.get());
  if (BN_cmp(p.get(), q.get()) < 0) std::swap(p, q);

  auto n = new_bn(), d = new_bn(), dp = new_bn(), dq = new_bn(), qinv = new_bn();
  auto p1 = new_bn(), q1 = new_bn(), lambda = new_bn(), g = new_bn(), prod = new_bn();
  check(BN_mul(n.get(), p.get(), q.get(), ctx.get()), "BN_mul");
  check(BN_sub(p1.get(), p.get(), BN_value_one()), "BN_sub");
  check(BN_sub(q1.get(), q.get(), BN_value_one()), "BN_sub");
  check(BN_mul(prod.get(), p1.get(), q1.get(), ctx.get()), "BN_mul");
  check(BN_gcd(g.get(), p1.get(), q1.get(), ctx.get()), "BN_gcd");
  check(BN_div(lambda.get(), nullptr, prod.get(), g.get(), ctx.get()), "BN_div");
  if (!BN_mod_inverse(d.get(), e.get(), lambda.get(), ctx.get())) throw Error(Errc::Internal, "BN_mod_inverse d");
  check(BN_mod(dp.get(), d.get(), p1.get(), ctx.get()), "BN_mod");
  check(BN_mod(dq.get(), d.get(), q1.get(), ctx.get()), "BN_mod");
  if (!BN_mod_inverse(qinv.get(), q.get(), p.get(), ctx.get())) throw Error(Errc::Internal, "BN_mod_inverse qinv");

  std::unique_ptr<OSSL_PARAM_BLD, decltype(&OSSL_PARAM_BLD_free)> bld(OSSL_PARAM_BLD_new(), OSSL_PARAM_BLD_free);
  if (!bld) throw Error(Errc::Internal, "OSSL_PARAM_BLD_new");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, n.get()), "param n");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, e.get()), "param e");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_D, d.get()), "param d");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR1, p.get()), "param p");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR2, q.get()), "param q");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT1, dp.get()), "param dp");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT2, dq.get()), "param dq");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_COEFFICIENT1, qinv.get()), "param qinv");
  std::unique_ptr<OSSL_PARAM, decltype(&OSSL_PARAM_free)> params(OSSL_PARAM_BLD_to_param(bld.get()),
                                                                  OSSL_PARAM_free);
  if (!params) throw Error(Errc::Internal, "OSSL_PARAM_BLD_to_param");

  PkeyCtxPtr pctx(EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr), EVP_PKEY_CTX_free);
  if (!pctx) throw Error(Errc::Internal, "EVP_PKEY_CTX_new_from_name");
  check(EVP_PKEY_fromdata_init(pctx.get()), "fromdata init");
  EVP_PKEY* raw = nullptr;
  check(EVP_PKEY_fromdata(pctx.get(), &raw, EVP_PKEY_KEYPAIR, params.get()), "fromdata");
  auto key = adopt(raw);

  PkeyCtxPtr check_ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, raw, nullptr), EVP_PKEY_CTX_free);
  if (!check_ctx || EVP_PKEY_pairwise_check(check_ctx.get()) != 1) throw Error(Errc::Internal, "pairwise check");
  return KeyPair(std::move(key));
}

// ---------------------------------------------------------------------------
// Signatures

Bytes sign(const KeyPair& key, std::string_view tag, ByteView msg, RandomSource& rng) {
  // EMSA-PSS-ENCODE (RFC 8017 9.1.1), emBits = 3071, emLen = 384.
  constexpr std::size_t kEmLen = kModulusBytes;
  constexpr std::size_t kDbLen = kEmLen - kHashSize - 1;
  auto m_hash = sha256({as_bytes(tag), msg});
  Bytes salt = rng.bytes(kPssSaltSize);
  Bytes zeros(8, 0);
  auto h = sha256({ByteView(zeros), view(m_hash), ByteView(salt)});

  Bytes db(kDbLen, 0);
  db[kDbLen - kPssSaltSize - 1] = 0x01;
  std::copy(salt.begin(), salt.end(), db.end() - static_cast<std::ptrdiff_t>(kPssSaltSize));
  Bytes mask = mgf1(view(h), kDbLen);
  for (std::size_t i = 0; i < kDbLen; ++i) db[i] ^= mask[i];
  db[0] &= 0x7f;

  Bytes em = std::move(db);
  append(em, view(h));
  em.push_back(0xbc);
  return raw_rsa(key.raw(), em, /*private_op=*/true);
}

bool verify(const PublicKey& key, std::string_view tag, ByteView msg, ByteView signature) {
  if (signature.size() != kModulusBytes) return false;
  auto m_hash = sha256({as_bytes(tag), msg});
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, key.raw(), nullptr), EVP_PKEY_CTX_free);
  if (!ctx || EVP_PKEY_verify_init(ctx.get()) != 1) throw Error(Errc::Internal, "verify init");
  check(EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_PSS_PADDING), "pss padding");
  check(EVP_PKEY_CTX_set_signature_md(ctx.get(), EVP_sha256()), "pss md");
  check(EVP_PKEY_CTX_set_rsa_mgf1_md(ctx.get(), EVP_sha256()), "pss mgf1");
  check(EVP_PKEY_CTX_set_rsa_pss_saltlen(ctx.get(), static_cast<int>(kPssSaltSize)), "pss saltlen");
  return EVP_PKEY_verify(ctx.get(), signature.data(), signature.size(), m_hash.data(), m_hash.size()) == 1;
}

bool verify(ByteView public_key_der, std::string_view tag, ByteView msg, ByteView signature) {
  return verify(PublicKey::from_der(public_key_der), tag, msg, signature);
}

// ---------------------------------------------------------------------------
// Key wrapping

Bytes oaep_encrypt(const PublicKey& recipient, ByteView message, RandomSource& rng) {
  // EME-OAEP encoding (RFC 8017 7.1.1), empty label.
  if (message.size() > kOaepCapacity) throw Error(Errc::FieldOutOfRange, "message exceeds OAEP capacity");
  constexpr std::size_t kDbLen = kModulusBytes - kHashSize - 1;
  auto l_hash = sha256(ByteView{});
  Bytes db(kDbLen, 0);
  std::copy(l_hash.begin(), l_hash.end(), db.begin());
  db[kDbLen - message.size() - 1] = 0x01;
  std::copy(message.begin(), message.end(), db.end() - static_cast<std::ptrdiff_t>(message.size()));

  Bytes seed = rng.bytes(kHashSize);
  Bytes db_mask = mgf1(seed, kDbLen);
  for (std::size_t i = 0; i < kDbLen; ++i) db[i] ^= db_mask[i];
  Bytes seed_mask = mgf1(db, kHashSize);
  for (std::size_t i = 0; i < kHashSize; ++i) seed[i] ^= seed_mask[i];

  Bytes em;
  em.reserve(kModulusBytes);
  em.push_back(0x00);
  append(em, seed);
  append(em, db);
  OPENSSL_cleanse(db.data(), db.size());
  auto out = raw_rsa(recipient.raw(), em, /*private_op=*/false);
  OPENSSL_cleanse(em.data(), em.size());
  return out;
}

Bytes wrap_key(const PublicKey& recipient, const SessionKey& session_key, RandomSource& rng) {
  return oaep_encrypt(recipient, session_key.bytes(), rng);
}

SessionKey unwrap_key(const KeyPair& key, ByteView wrapped) {
  if (wrapped.size() != kModulusBytes) throw Error(Errc::UnwrapFailure);
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, key.raw(), nullptr), EVP_PKEY_CTX_free);
  if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) != 1) throw Error(Errc::Internal, "decrypt init");
  check(EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING), "oaep padding");
  check(EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()), "oaep md");
  check(EVP_PKEY_CTX_set_rsa_mgf1_md(ctx.get(), EVP_sha256()), "oaep mgf1");
  Bytes out(kModulusBytes);
  std::size_t out_len = out.size();
  int rc = EVP_PKEY_decrypt(ctx.get(), out.data(), &out_len, wrapped.data(), wrapped.size());
  if (rc != 1 || out_len != kSessionKeySize) {
    OPENSSL_cleanse(out.data(), out.size());
    throw Error(Errc::UnwrapFailure);
  }
  SessionKey k(ByteView(out.data(), kSessionKeySize));
  OPENSSL_cleanse(out.data(), out.size());
  return k;
}

// ---------------------------------------------------------------------------
// Payload encryption

Bytes seal_payload(const SessionKey& key, const wire::Nonce& nonce, ByteView plaintext) {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  if (!ctx) throw Error(Errc::Internal, "cipher ctx");
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr), "gcm init");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()), nullptr), "ivlen");
  check(EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data()), "gcm key");
  Bytes out(plaintext.size() + wire::kTagSize);
  int len = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())),
          "gcm update");
  }
  int fin = 0;
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin), "gcm final");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(wire::kTagSize),
                            out.data() + plaintext.size()),
        "gcm tag");
  return out;
}

Bytes open_payload(const SessionKey& key, const wire::Nonce& nonce, ByteView ciphertext) {
  if (ciphertext.size() < wire::kTagSize) throw Error(Errc::OpenFailure);
  const std::size_t body = ciphertext.size() - wire::kTagSize;
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  if (!ctx) throw Error(Errc::Internal, "cipher ctx");
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr), "gcm init");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()), nullptr), "ivlen");
  check(EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data()), "gcm key");
  Bytes out(body);
  int len = 0;
  if (body > 0) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(body)), "gcm update");
  }
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(tag.size()), tag.data()), "gcm tag");
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) {
    OPENSSL_cleanse(out.data(), out.size());
    throw Error(Errc::OpenFailure);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::Io, "short write " + path.string());
}

}  // namespace

KeyPair load_keypair(const std::filesystem::path& path) {
  Bytes data = read_file(path);
  try {
    auto key = KeyPair::parse(data);
    OPENSSL_cleanse(data.data(), data.size());
    return key;
  } catch (...) {
    OPENSSL_cleanse(data.data(), data.size());
    throw;
  }
}

PublicKey load_public_key(const std::filesystem::path& path) { return PublicKey::parse(read_file(path)); }

void save_keypair(const KeyPair& key, const std::filesystem::path& path) {
  Bytes der = key.private_der();
  {
    // Owner-only before any secret byte hits the file.
    std::ofstream touch(path, std::ios::binary | std::ios::trunc);
    if (!touch) throw Error(Errc::Io, "cannot write " + path.string());
  }
  std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  write_file(path, der);
  OPENSSL_cleanse(der.data(), der.size());
}

void save_public_key(const PublicKey& key, const std::filesystem::path& path) { write_file(path, key.to_der()); }

}  // namespace eaas::crypto
