#include "eaas/wire.hpp"

#include <limits>

#include "eaas/error.hpp"

namespace eaas::wire {

namespace {

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  ByteView take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(Errc::MalformedMessage, "truncated");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  std::uint32_t u32() { return load_u32be(take(4)); }
  std::uint64_t u64() { return load_u64be(take(8)); }

  template <std::size_t N>
  std::array<std::uint8_t, N> array() {
    auto b = take(N);
    std::array<std::uint8_t, N> out{};
    std::copy(b.begin(), b.end(), out.begin());
    return out;
  }

  void header(MsgType expected) {
    auto magic = take(kMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw Error(Errc::MalformedMessage, "bad magic");
    if (u8() != kVersion) throw Error(Errc::MalformedMessage, "unsupported version");
    if (u8() != static_cast<std::uint8_t>(expected)) throw Error(Errc::MalformedMessage, "unexpected message type");
  }

  void finish() const {
    if (pos_ != data_.size()) throw Error(Errc::MalformedMessage, "trailing bytes");
  }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

void put_header(Bytes& out, MsgType type) {
  append(out, view(kMagic));
  put_u8(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(type));
}

void check_delta_s(std::uint32_t delta_s, std::uint32_t max_delta_s) {
  if (delta_s == 0 || delta_s > max_delta_s) {
    throw Error(Errc::FieldOutOfRange, "delta_s " + std::to_string(delta_s));
  }
}

}  // namespace

Fingerprint fingerprint(ByteView public_key_der) { return Fingerprint{sha256(public_key_der)}; }

Bytes encode_request(const EntropyRequest& req) {
  if (req.client_pub_key.empty() || req.client_pub_key.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::MalformedMessage, "public key length");
  }
  if (req.sigma1.size() != kSignatureSize) throw Error(Errc::MalformedMessage, "sigma1 length");
  check_delta_s(req.delta_s, std::numeric_limits<std::uint32_t>::max());

  Bytes out;
  out.reserve(4 + 1 + 1 + 2 + req.client_pub_key.size() + 4 + 2 + kSignatureSize);
  put_header(out, MsgType::Request);
  put_u16be(out, static_cast<std::uint16_t>(req.client_pub_key.size()));
  append(out, req.client_pub_key);
  put_u32be(out, req.delta_s);
  put_u16be(out, static_cast<std::uint16_t>(req.sigma1.size()));
  append(out, req.sigma1);
  return out;
}

EntropyRequest decode_request(ByteView data, std::uint32_t max_delta_s) {
  Reader r(data);
  r.header(MsgType::Request);
  EntropyRequest req;
  auto pk_len = r.u16();
  if (pk_len == 0) throw Error(Errc::MalformedMessage, "empty public key");
  auto pk = r.take(pk_len);
  req.client_pub_key.assign(pk.begin(), pk.end());
  req.delta_s = r.u32();
  auto sig_len = r.u16();
  if (sig_len != kSignatureSize) throw Error(Errc::MalformedMessage, "sigma1 length");
  auto sig = r.take(sig_len);
  req.sigma1.assign(sig.begin(), sig.end());
  r.finish();
  check_delta_s(req.delta_s, max_delta_s);
  return req;
}

Bytes encode_envelope(const SealedEnvelope& env) {
  if (env.wrapped_key.size() != kWrappedKeySize) throw Error(Errc::MalformedMessage, "wrapped key length");
  if (env.ciphertext.size() < kTagSize || env.ciphertext.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::MalformedMessage, "ciphertext length");
  }
  if (env.sigma2 && env.sigma2->size() != kSignatureSize) throw Error(Errc::MalformedMessage, "sigma2 length");

  Bytes out;
  out.reserve(6 + kWrappedKeySize + kNonceSize + 4 + env.ciphertext.size() + 1 + kSignatureSize);
  put_header(out, MsgType::Envelope);
  append(out, env.wrapped_key);
  append(out, view(env.nonce));
  put_u32be(out, static_cast<std::uint32_t>(env.ciphertext.size()));
  append(out, env.ciphertext);
  put_u8(out, env.sigma2 ? 1 : 0);
  if (env.sigma2) append(out, *env.sigma2);
  return out;
}

SealedEnvelope decode_envelope(ByteView data) {
  Reader r(data);
  r.header(MsgType::Envelope);
  SealedEnvelope env;
  auto wk = r.take(kWrappedKeySize);
  env.wrapped_key.assign(wk.begin(), wk.end());
  env.nonce = r.array<kNonceSize>();
  auto ct_len = r.u32();
  if (ct_len < kTagSize) throw Error(Errc::MalformedMessage, "ciphertext shorter than tag");
  auto ct = r.take(ct_len);
  env.ciphertext.assign(ct.begin(), ct.end());
  auto flag = r.u8();
  if (flag > 1) throw Error(Errc::MalformedMessage, "sig_flag");
  if (flag == 1) {
    auto sig = r.take(kSignatureSize);
    env.sigma2 = Bytes(sig.begin(), sig.end());
  }
  r.finish();
  return env;
}

Bytes encode_response_payload(const EntropyResponse& resp) {
  Bytes out;
  out.reserve(kResponsePayloadHeader + resp.entropy.size());
  put_u8(out, kVersion);
  put_u64be(out, resp.t2);
  append(out, resp.entropy);
  return out;
}

EntropyResponse decode_response_payload(ByteView data) {
  Reader r(data);
  if (r.u8() != kVersion) throw Error(Errc::MalformedMessage, "payload version");
  EntropyResponse resp;
  resp.t2 = r.u64();
  auto rest = data.subspan(kResponsePayloadHeader);
  resp.entropy.assign(rest.begin(), rest.end());
  return resp;
}

Bytes encode_quote(const AttestationQuote& quote) {
  if (quote.signature.size() != kSignatureSize) throw Error(Errc::MalformedMessage, "quote signature length");
  Bytes out = quote_signed_bytes(quote);
  Bytes framed;
  framed.reserve(6 + out.size() + kSignatureSize);
  put_header(framed, MsgType::Quote);
  append(framed, out);
  append(framed, quote.signature);
  return framed;
}

AttestationQuote decode_quote(ByteView data) {
  Reader r(data);
  r.header(MsgType::Quote);
  AttestationQuote q;
  q.nonce = r.array<32>();
  q.sm_measurement = r.array<kMeasurementSize>();
  q.ta_measurement = r.array<kMeasurementSize>();
  q.quote_time = r.u64();
  auto sig = r.take(kSignatureSize);
  q.signature.assign(sig.begin(), sig.end());
  r.finish();
  return q;
}

Bytes encode_entropy_post(const EntropyPost& post) {
  Bytes out;
  out.reserve(kFingerprintSize + post.envelope.size());
  append(out, view(post.hint.id));
  append(out, post.envelope);
  return out;
}

EntropyPost decode_entropy_post(ByteView body) {
  if (body.size() < kFingerprintSize) throw Error(Errc::MalformedMessage, "body shorter than hint");
  EntropyPost post;
  std::copy_n(body.begin(), kFingerprintSize, post.hint.id.begin());
  auto env = body.subspan(kFingerprintSize);
  if (decode_envelope(env).sigma2) throw Error(Errc::MalformedMessage, "request envelope carries sigma2");
  post.envelope.assign(env.begin(), env.end());
  return post;
}

Bytes request_signed_bytes(ByteView public_key_der, std::uint32_t delta_s) {
  Bytes out(public_key_der.begin(), public_key_der.end());
  put_u32be(out, delta_s);
  return out;
}

Bytes envelope_signed_bytes(const SealedEnvelope& env) {
  Bytes out;
  out.reserve(env.wrapped_key.size() + kNonceSize + env.ciphertext.size());
  append(out, env.wrapped_key);
  append(out, view(env.nonce));
  append(out, env.ciphertext);
  return out;
}

Bytes quote_signed_bytes(const AttestationQuote& quote) {
  Bytes out;
  out.reserve(32 + 2 * kMeasurementSize + 8);
  append(out, view(quote.nonce));
  append(out, view(quote.sm_measurement));
  append(out, view(quote.ta_measurement));
  put_u64be(out, quote.quote_time);
  return out;
}

}  // namespace eaas::wire
