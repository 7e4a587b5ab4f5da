#include "eaas/trusted_core.hpp"

#include <fstream>

#include "eaas/error.hpp"

namespace eaas::ta {

namespace {

Status status_for(Errc code) {
  switch (code) {
    case Errc::MalformedMessage: return Status::Malformed;
    case Errc::FieldOutOfRange: return Status::FieldOutOfRange;
    case Errc::UnwrapFailure:
    case Errc::OpenFailure:
    case Errc::DecryptFailure: return Status::DecryptFailure;
    case Errc::InvalidKey:
    case Errc::BadSignature: return Status::BadSignature;
    case Errc::HintMismatch: return Status::HintMismatch;
    case Errc::EntropyDepleted:
    case Errc::InsufficientCredit: return Status::EntropyDepleted;
    case Errc::NoSources: return Status::NoSources;
    case Errc::UnknownCommand: return Status::UnknownCommand;
    default: return Status::Internal;
  }
}

class PayloadReader {
 public:
  explicit PayloadReader(ByteView data) : data_(data) {}
  ByteView take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(Errc::MalformedMessage, "short TA payload");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t u64() { return load_u64be(take(8)); }
  std::uint8_t u8() { return take(1)[0]; }
  ByteView rest() { return take(data_.size() - pos_); }
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::UnknownCommand: return "unknown-command";
    case Status::Malformed: return "malformed";
    case Status::DecryptFailure: return "decrypt-failure";
    case Status::BadSignature: return "bad-signature";
    case Status::HintMismatch: return "hint-mismatch";
    case Status::FieldOutOfRange: return "out-of-range";
    case Status::EntropyDepleted: return "entropy-depleted";
    case Status::NoSources: return "no-sources";
    case Status::Internal: return "internal";
  }
  return "?";
}

Bytes handle_request_payload(std::uint64_t now_ms, const wire::Fingerprint& hint, ByteView envelope) {
  Bytes out;
  put_u64be(out, now_ms);
  append(out, view(hint.id));
  append(out, envelope);
  return out;
}

Bytes attest_payload(std::uint64_t now_ms, ByteView nonce) {
  Bytes out;
  put_u64be(out, now_ms);
  append(out, nonce);
  return out;
}

Bytes encode_pool_status(const pool::PoolStatus& st) {
  Bytes out;
  put_u64be(out, st.credited_bits);
  put_u64be(out, st.buffered_bytes);
  put_u64be(out, st.total_credited_bits);
  put_u64be(out, st.total_extracted_bytes);
  put_u16be(out, static_cast<std::uint16_t>(st.sources.size()));
  for (const auto& s : st.sources) {
    const auto& id = s.descriptor.source_id;
    put_u8(out, static_cast<std::uint8_t>(std::min<std::size_t>(id.size(), 255)));
    append(out, as_bytes(std::string_view(id).substr(0, 255)));
    put_u8(out, static_cast<std::uint8_t>(s.health));
    put_u64be(out, s.blocks_pulled);
    put_u64be(out, s.blocks_failed);
    put_u64be(out, s.credited_bits);
    put_u64be(out, s.degraded_at_block.value_or(0));
  }
  return out;
}

pool::PoolStatus decode_pool_status(ByteView data) {
  PayloadReader r(data);
  pool::PoolStatus st;
  st.credited_bits = r.u64();
  st.buffered_bytes = static_cast<std::size_t>(r.u64());
  st.total_credited_bits = r.u64();
  st.total_extracted_bytes = r.u64();
  auto count_bytes = r.take(2);
  std::size_t count = static_cast<std::size_t>((count_bytes[0] << 8) | count_bytes[1]);
  for (std::size_t i = 0; i < count; ++i) {
    pool::SourceInfo info;
    auto id = r.take(r.u8());
    info.descriptor.source_id.assign(id.begin(), id.end());
    auto health = r.u8();
    if (health > 2) throw Error(Errc::MalformedMessage, "health value");
    info.health = static_cast<pool::SourceHealth>(health);
    info.blocks_pulled = r.u64();
    info.blocks_failed = r.u64();
    info.credited_bits = r.u64();
    if (auto at = r.u64(); at != 0) info.degraded_at_block = at;
    st.sources.push_back(std::move(info));
  }
  if (!r.done()) throw Error(Errc::MalformedMessage, "trailing bytes");
  return st;
}

Digest measure_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot measure " + path.string());
  Bytes data(std::istreambuf_iterator<char>(in), {});
  return sha256(data);
}

TrustedCore::TrustedCore(TaConfig config, crypto::KeyPair identity, std::vector<SourceBinding> sources, Clock& clock,
                         std::unique_ptr<RandomSource> rng)
    : config_(std::move(config)),
      identity_(std::move(identity)),
      identity_public_der_(identity_.public_der()),
      rng_(std::move(rng)),
      pool_(std::make_unique<pool::EntropyPool>(clock, config_.pool_options)) {
  if (!rng_) throw Error(Errc::ConfigError, "trusted core needs a random source");
  for (auto& s : sources) pool_->register_source(std::move(s.descriptor), std::move(s.supplier));
}

std::unique_ptr<TrustedCore> TrustedCore::open(TaConfig config, const std::filesystem::path& key_path,
                                               bool generate_if_missing, std::vector<SourceBinding> sources,
                                               Clock& clock, std::unique_ptr<RandomSource> rng) {
  if (!rng) throw Error(Errc::ConfigError, "trusted core needs a random source");
  std::optional<crypto::KeyPair> identity;
  if (std::filesystem::exists(key_path)) {
    try {
      identity = crypto::load_keypair(key_path);
    } catch (const Error& e) {
      throw Error(Errc::KeyLoadFailure, key_path.string() + ": " + e.what());
    }
  } else if (generate_if_missing) {
    identity = crypto::generate_keypair(*rng);
    try {
      crypto::save_keypair(*identity, key_path);
    } catch (const Error& e) {
      throw Error(Errc::KeyLoadFailure, e.what());
    }
  } else {
    throw Error(Errc::KeyLoadFailure, "missing key file " + key_path.string());
  }
  return std::make_unique<TrustedCore>(std::move(config), std::move(*identity), std::move(sources), clock,
                                       std::move(rng));
}

TaResult TrustedCore::invoke(const TaCommand& cmd) {
  std::lock_guard lock(mutex_);
  try {
    switch (cmd.command_id) {
      case static_cast<std::uint8_t>(Command::GetPubkey):
        if (!cmd.payload.empty()) return {Status::Malformed, {}};
        return {Status::Ok, identity_public_der_};
      case static_cast<std::uint8_t>(Command::HandleRequest): return handle_request(cmd.payload);
      case static_cast<std::uint8_t>(Command::Attest): return attest(cmd.payload);
      case static_cast<std::uint8_t>(Command::PoolStatus): return pool_status(cmd.payload);
      default: return {Status::UnknownCommand, {}};
    }
  } catch (const Error& e) {
    return {status_for(e.code()), {}};
  } catch (const std::exception&) {
    return {Status::Internal, {}};
  }
}

TaResult TrustedCore::handle_request(ByteView payload) {
  // Until the request opens, every failure is a decrypt failure: the caller
  // learns nothing about which layer of the garbage was wrong.
  std::uint64_t now = 0;
  wire::Fingerprint hint;
  Bytes plaintext;
  try {
    PayloadReader r(payload);
    now = r.u64();
    auto hint_bytes = r.take(wire::kFingerprintSize);
    std::copy(hint_bytes.begin(), hint_bytes.end(), hint.id.begin());
    const auto request_envelope = wire::decode_envelope(r.rest());
    if (request_envelope.sigma2) throw Error(Errc::DecryptFailure);
    auto session = crypto::unwrap_key(identity_, request_envelope.wrapped_key);
    plaintext = crypto::open_payload(session, request_envelope.nonce, request_envelope.ciphertext);
  } catch (const Error&) {
    return {Status::DecryptFailure, {}};
  }

  // Decode; sigma1 must verify under the key it carries.
  const auto request = wire::decode_request(plaintext, config_.max_delta_s);
  std::fill(plaintext.begin(), plaintext.end(), 0);
  const auto signed_bytes = wire::request_signed_bytes(request.client_pub_key, request.delta_s);
  std::optional<crypto::PublicKey> client_key;
  try {
    client_key = crypto::PublicKey::from_der(request.client_pub_key);
  } catch (const Error&) {
    return {Status::BadSignature, {}};
  }
  if (!crypto::verify(*client_key, crypto::kRequestTag, signed_bytes, request.sigma1)) {
    return {Status::BadSignature, {}};
  }
  if (wire::fingerprint(request.client_pub_key) != hint) return {Status::HintMismatch, {}};

  // Entropy and the session key both come out of the pool in one draw.
  Bytes drawn = pool_->draw(request.delta_s + static_cast<std::uint32_t>(crypto::kSessionKeySize),
                            config_.harvest_deadline);
  crypto::SessionKey session(ByteView(drawn).subspan(request.delta_s));
  wire::EntropyResponse response{now, Bytes(drawn.begin(), drawn.begin() + request.delta_s)};
  std::fill(drawn.begin(), drawn.end(), 0);

  // Seal, wrap for the client, sign.
  wire::SealedEnvelope env;
  rng_->fill(env.nonce);
  Bytes body = wire::encode_response_payload(response);
  std::fill(response.entropy.begin(), response.entropy.end(), 0);
  env.ciphertext = crypto::seal_payload(session, env.nonce, body);
  std::fill(body.begin(), body.end(), 0);
  env.wrapped_key = crypto::wrap_key(*client_key, session, *rng_);
  env.sigma2 = crypto::sign(identity_, crypto::kResponseTag, wire::envelope_signed_bytes(env), *rng_);
  return {Status::Ok, wire::encode_envelope(env)};
}

TaResult TrustedCore::attest(ByteView payload) {
  PayloadReader r(payload);
  wire::AttestationQuote quote;
  quote.quote_time = r.u64();
  auto nonce = r.take(quote.nonce.size());
  if (!r.done()) return {Status::Malformed, {}};
  std::copy(nonce.begin(), nonce.end(), quote.nonce.begin());
  quote.sm_measurement = config_.sm_measurement;
  quote.ta_measurement = config_.ta_measurement;
  quote.signature = crypto::sign(identity_, crypto::kQuoteTag, wire::quote_signed_bytes(quote), *rng_);
  return {Status::Ok, wire::encode_quote(quote)};
}

TaResult TrustedCore::pool_status(ByteView payload) {
  if (!payload.empty()) return {Status::Malformed, {}};
  return {Status::Ok, encode_pool_status(pool_->status())};
}

}  // namespace eaas::ta
