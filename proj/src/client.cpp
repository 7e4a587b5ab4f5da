#include "eaas/client.hpp"

#include <algorithm>
#include <string>

#include "eaas/error.hpp"

namespace eaas::client {

namespace {

crypto::KeyPair load_store_key(const std::filesystem::path& path) {
  try {
    return crypto::load_keypair(path);
  } catch (const Error& e) {
    throw Error(Errc::StoreCorrupt, path.string() + ": " + e.what());
  }
}

crypto::PublicKey load_pinned_key(const std::filesystem::path& path) {
  try {
    return crypto::load_public_key(path);
  } catch (const Error& e) {
    throw Error(Errc::StoreCorrupt, path.string() + ": " + e.what());
  }
}

}  // namespace

ClientIdentity provision(const std::filesystem::path& store,
                         const std::optional<std::filesystem::path>& server_key_file, RandomSource& rng) {
  std::error_code ec;
  std::filesystem::create_directories(store, ec);
  if (ec) throw Error(Errc::Io, "cannot create store " + store.string() + ": " + ec.message());

  const auto key_path = store / kClientKeyFile;
  const auto pin_path = store / kServerKeyFile;

  std::optional<crypto::PublicKey> offered;
  if (server_key_file) {
    try {
      offered = crypto::load_public_key(*server_key_file);
    } catch (const Error& e) {
      throw Error(Errc::MissingServerKey, server_key_file->string() + ": " + e.what());
    }
  }

  std::optional<crypto::PublicKey> pinned;
  if (std::filesystem::exists(pin_path)) {
    pinned = load_pinned_key(pin_path);
    if (offered && offered->to_der() != pinned->to_der()) {
      throw Error(Errc::ServerKeyConflict, "store already pins a different server key");
    }
  } else if (offered) {
    crypto::save_public_key(*offered, pin_path);
    pinned = offered;
  } else {
    throw Error(Errc::MissingServerKey, "no server key pinned and none supplied");
  }

  if (std::filesystem::exists(key_path)) {
    return ClientIdentity{load_store_key(key_path), *pinned, store};
  }
  auto key = crypto::generate_keypair(rng);
  crypto::save_keypair(key, key_path);
  return ClientIdentity{std::move(key), *pinned, store};
}

ClientIdentity load_identity(const std::filesystem::path& store) {
  const auto key_path = store / kClientKeyFile;
  const auto pin_path = store / kServerKeyFile;
  if (!std::filesystem::exists(pin_path)) throw Error(Errc::MissingServerKey, pin_path.string());
  if (!std::filesystem::exists(key_path)) throw Error(Errc::StoreCorrupt, "missing " + key_path.string());
  return ClientIdentity{load_store_key(key_path), load_pinned_key(pin_path), store};
}

wire::EntropyRequest make_signed_request(const crypto::KeyPair& key, std::uint32_t delta_s, RandomSource& rng) {
  wire::EntropyRequest req;
  req.client_pub_key = key.public_der();
  req.delta_s = delta_s;
  req.sigma1 = crypto::sign(key, crypto::kRequestTag, wire::request_signed_bytes(req.client_pub_key, delta_s), rng);
  return req;
}

Bytes seal_request(ByteView encoded_request, const crypto::PublicKey& server_key, RandomSource& rng) {
  auto session = crypto::SessionKey::generate(rng);
  wire::SealedEnvelope env;
  rng.fill(env.nonce);
  env.ciphertext = crypto::seal_payload(session, env.nonce, encoded_request);
  env.wrapped_key = crypto::wrap_key(server_key, session, rng);
  return wire::encode_envelope(env);
}

PreparedRequest build_request(const ClientIdentity& identity, std::uint32_t delta_s, Clock& clock, RandomSource& rng,
                              std::uint32_t max_delta_s) {
  if (delta_s == 0 || delta_s > max_delta_s) throw Error(Errc::FieldOutOfRange, "delta_s " + std::to_string(delta_s));
  PreparedRequest out;
  out.t1 = clock.now_ms();
  out.delta_s = delta_s;
  out.hint = identity.fingerprint();
  auto request = make_signed_request(identity.keypair, delta_s, rng);
  out.envelope = seal_request(wire::encode_request(request), identity.server_key, rng);
  return out;
}

Bytes verify_response(ByteView envelope, std::uint64_t t1, std::uint32_t delta_s, const crypto::PublicKey& server_key,
                      const crypto::KeyPair& identity, const VerifyOptions& options) {
  const auto env = wire::decode_envelope(envelope);
  if (!env.sigma2) throw Error(Errc::BadServerSignature, "response is unsigned");
  if (!crypto::verify(server_key, crypto::kResponseTag, wire::envelope_signed_bytes(env), *env.sigma2)) {
    throw Error(Errc::BadServerSignature);
  }
  const auto session = crypto::unwrap_key(identity, env.wrapped_key);
  Bytes plaintext = crypto::open_payload(session, env.nonce, env.ciphertext);
  auto response = wire::decode_response_payload(plaintext);
  std::fill(plaintext.begin(), plaintext.end(), 0);
  if (response.entropy.size() != delta_s) {
    throw Error(Errc::WrongQuantity,
                "expected " + std::to_string(delta_s) + " bytes, got " + std::to_string(response.entropy.size()));
  }
  if (response.t2 <= t1) throw Error(Errc::Stale, "t2 " + std::to_string(response.t2) + " <= t1 " + std::to_string(t1));
  if (options.now_ms && response.t2 > *options.now_ms + options.max_future_skew_ms) {
    throw Error(Errc::ClockSkew, "t2 is ahead of the local clock");
  }
  return std::move(response.entropy);
}

Errc errc_for_server_code(std::string_view code) {
  if (code == "malformed") return Errc::MalformedMessage;
  if (code == "decrypt-failure") return Errc::DecryptFailure;
  if (code == "bad-signature") return Errc::BadSignature;
  if (code == "hint-mismatch") return Errc::HintMismatch;
  if (code == "out-of-range") return Errc::FieldOutOfRange;
  if (code == "entropy-depleted") return Errc::EntropyDepleted;
  if (code == "no-sources") return Errc::NoSources;
  if (code == "throttled") return Errc::Throttled;
  return Errc::ServerRejected;
}

FetchResult request_entropy(const ClientIdentity& identity, Transport& transport, std::uint32_t delta_s, Clock& clock,
                            RandomSource& rng, const FetchOptions& options) {
  const std::uint32_t attempts = std::max<std::uint32_t>(1, options.max_attempts);
  std::optional<Error> last;
  for (std::uint32_t attempt = 1; attempt <= attempts; ++attempt) {
    auto prepared = build_request(identity, delta_s, clock, rng, options.max_delta_s);
    HttpReply reply;
    try {
      reply = transport.post("/v1/entropy", prepared.body());
    } catch (const Error& e) {
      if (e.code() != Errc::Transport) throw;
      last = e;
      if (attempt < attempts) clock.sleep_for(1000ull * attempt);
      continue;
    }
    if (reply.status == 429) {
      last = Error(Errc::Throttled);
      std::uint64_t wait_s = 1;
      if (auto it = reply.headers.find("Retry-After"); it != reply.headers.end()) {
        try {
          wait_s = std::stoull(it->second);
        } catch (const std::exception&) {
        }
      }
      if (attempt < attempts) clock.sleep_for(1000 * std::min(wait_s, options.max_backoff_s));
      continue;
    }
    if (reply.status != 200) {
      auto code = reply.error_code();
      throw Error(errc_for_server_code(code), "server replied " + std::to_string(reply.status) + " " + code);
    }
    VerifyOptions verify_options{clock.now_ms(), options.max_future_skew_ms};
    return {verify_response(reply.body, prepared.t1, delta_s, identity.server_key, identity.keypair, verify_options),
            attempt};
  }
  throw *last;
}

std::string_view to_string(QuoteReject r) {
  switch (r) {
    case QuoteReject::Signature: return "sig";
    case QuoteReject::Nonce: return "nonce";
    case QuoteReject::Measurement: return "measurement";
  }
  return "?";
}

QuoteVerdict verify_quote(const wire::AttestationQuote& quote, ByteView nonce, ByteView expected_sm,
                          ByteView expected_ta, const crypto::PublicKey& attestation_key) {
  if (!crypto::verify(attestation_key, crypto::kQuoteTag, wire::quote_signed_bytes(quote), quote.signature)) {
    return {false, QuoteReject::Signature};
  }
  if (!equal_ct(view(quote.nonce), nonce)) return {false, QuoteReject::Nonce};
  if (!equal_ct(view(quote.sm_measurement), expected_sm) || !equal_ct(view(quote.ta_measurement), expected_ta)) {
    return {false, QuoteReject::Measurement};
  }
  return {true, std::nullopt};
}

}  // namespace eaas::client
