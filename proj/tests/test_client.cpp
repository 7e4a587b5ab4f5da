#include <catch2/catch_amalgamated.hpp>

#include "eaas/client.hpp"
#include "eaas/error.hpp"
#include "eaas/server.hpp"
#include "eaas/sources.hpp"
#include "forge.hpp"
#include "support.hpp"

using namespace eaas;
using namespace eaas::client;

namespace {

constexpr std::uint64_t kNow = 1'700'000'000'000;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Internal;
}

ClientIdentity device() { return {test::key("device"), test::key("tes").public_key(), {}}; }

// Advances the shared clock by one-way latency in each direction.
class LatencyTransport final : public Transport {
 public:
  LatencyTransport(Transport& inner, ManualClock& clock) : inner_(inner), clock_(clock) {}
  HttpReply post(const std::string& path, ByteView body) override {
    clock_.advance(2);
    auto r = inner_.post(path, body);
    clock_.advance(2);
    return r;
  }
  HttpReply get(const std::string& path) override { return inner_.get(path); }

 private:
  Transport& inner_;
  ManualClock& clock_;
};

class OfflineTransport final : public Transport {
 public:
  int calls = 0;
  HttpReply post(const std::string&, ByteView) override {
    ++calls;
    throw Error(Errc::Transport, "connection refused");
  }
  HttpReply get(const std::string&) override { throw Error(Errc::Transport, "connection refused"); }
};

struct LocalServer {
  LocalServer() : clock(kNow) {
    std::vector<ta::SourceBinding> sources;
    sources.push_back({{"s0", 1.0, 1 << 20}, pool::simulated_sensor_supplier(1)});
    sources.push_back({{"s1", 1.0, 1 << 20}, pool::simulated_sensor_supplier(2)});
    ta::TaConfig cfg;
    cfg.harvest_deadline = std::chrono::milliseconds(0);
    core = std::make_unique<ta::TrustedCore>(cfg, test::key("tes"), std::move(sources), clock,
                                             std::make_unique<SeededRandom>(3));
    service = std::make_unique<server::TesService>(*core, server::ThrottleConfig{}, clock, log);
  }
  ManualClock clock;
  Logger log{[](LogLevel, std::string_view) {}};
  std::unique_ptr<ta::TrustedCore> core;
  std::unique_ptr<server::TesService> service;
};

}  // namespace

TEST_CASE("provisioning a fresh store") {
  test::TempDir dir;
  OsRandom rng;
  auto server_pub = dir.path() / "server.der";
  crypto::save_public_key(test::key("tes").public_key(), server_pub);
  auto store = dir.path() / "store";

  CHECK(code_of([&] { provision(store, std::nullopt, rng); }) == Errc::MissingServerKey);
  CHECK(code_of([&] { provision(store, dir.path() / "missing.der", rng); }) == Errc::MissingServerKey);

  auto id = provision(store, server_pub, rng);
  CHECK(id.keypair.bits() == 3072);
  CHECK(id.server_key.to_der() == test::key("tes").public_der());
  CHECK(std::filesystem::exists(store / kClientKeyFile));
  CHECK(std::filesystem::exists(store / kServerKeyFile));

  SECTION("is idempotent") {
    auto again = provision(store, std::nullopt, rng);
    CHECK(again.keypair.public_der() == id.keypair.public_der());
    auto with_same_key = provision(store, server_pub, rng);
    CHECK(with_same_key.keypair.public_der() == id.keypair.public_der());
    CHECK(load_identity(store).fingerprint() == id.fingerprint());
  }
  SECTION("refuses a different server key") {
    auto other = dir.path() / "other.der";
    crypto::save_public_key(test::key("device").public_key(), other);
    CHECK(code_of([&] { provision(store, other, rng); }) == Errc::ServerKeyConflict);
  }
  SECTION("detects a truncated key file") {
    auto bytes = test::read_file(store / kClientKeyFile);
    test::write_file(store / kClientKeyFile, ByteView(bytes).first(bytes.size() / 2));
    CHECK(code_of([&] { provision(store, std::nullopt, rng); }) == Errc::StoreCorrupt);
    CHECK(code_of([&] { load_identity(store); }) == Errc::StoreCorrupt);
  }
  SECTION("detects a corrupt pin") {
    test::write_file(store / kServerKeyFile, Bytes(10, 0));
    CHECK(code_of([&] { provision(store, std::nullopt, rng); }) == Errc::StoreCorrupt);
  }
}

TEST_CASE("load_identity needs an existing store") {
  test::TempDir dir;
  CHECK_THROWS_AS(load_identity(dir.path() / "none"), Error);
}

TEST_CASE("built requests decrypt to a signed request for delta_s") {
  OsRandom rng;
  ManualClock clock(kNow);
  auto id = device();
  auto p = build_request(id, 32, clock, rng);
  CHECK(p.t1 == kNow);
  CHECK(p.delta_s == 32);
  CHECK(p.hint == id.fingerprint());
  auto env = wire::decode_envelope(p.envelope);
  CHECK_FALSE(env.sigma2);
  auto session = crypto::unwrap_key(test::key("tes"), env.wrapped_key);
  auto req = wire::decode_request(crypto::open_payload(session, env.nonce, env.ciphertext));
  CHECK(req.delta_s == 32);
  CHECK(req.client_pub_key == id.keypair.public_der());
  CHECK(crypto::verify(id.keypair.public_key(), crypto::kRequestTag,
                       wire::request_signed_bytes(req.client_pub_key, req.delta_s), req.sigma1));
}

TEST_CASE("request size limits") {
  OsRandom rng;
  ManualClock clock(kNow);
  auto id = device();
  CHECK(code_of([&] { build_request(id, 0, clock, rng); }) == Errc::FieldOutOfRange);
  CHECK(code_of([&] { build_request(id, 4097, clock, rng); }) == Errc::FieldOutOfRange);
  CHECK(code_of([&] { build_request(id, 101, clock, rng, 100); }) == Errc::FieldOutOfRange);
  CHECK_NOTHROW(build_request(id, 4096, clock, rng));
}

TEST_CASE("identical requests encrypt differently") {
  OsRandom rng;
  ManualClock clock(kNow);
  auto id = device();
  auto a = build_request(id, 32, clock, rng);
  auto b = build_request(id, 32, clock, rng);
  CHECK(a.envelope != b.envelope);
  CHECK(a.hint == b.hint);
}

TEST_CASE("response verification") {
  OsRandom rng;
  auto id = device();
  const auto& server = test::key("tes");
  const auto pk = id.keypair.public_key();
  Bytes s(32, 0x42);

  SECTION("honest") {
    auto env = test::forge_response(server, pk, kNow + 1, s, rng);
    CHECK(verify_response(env, kNow, 32, id.server_key, id.keypair) == s);
  }
  SECTION("t2 equal to t1 is stale") {
    auto env = test::forge_response(server, pk, kNow, s, rng);
    CHECK(code_of([&] { verify_response(env, kNow, 32, id.server_key, id.keypair); }) == Errc::Stale);
  }
  SECTION("wrong quantity under a valid signature") {
    auto env = test::forge_response(server, pk, kNow + 1, Bytes(31, 1), rng);
    CHECK(code_of([&] { verify_response(env, kNow, 32, id.server_key, id.keypair); }) == Errc::WrongQuantity);
  }
  SECTION("ciphertext flipped before signing fails to open") {
    auto env = test::forge_response(server, pk, kNow + 1, s, rng, {.flip_ciphertext = true});
    CHECK(code_of([&] { verify_response(env, kNow, 32, id.server_key, id.keypair); }) == Errc::OpenFailure);
  }
  SECTION("unsigned or wrongly signed responses") {
    auto unsigned_env = test::forge_response(server, pk, kNow + 1, s, rng, {.sign = false});
    CHECK(code_of([&] { verify_response(unsigned_env, kNow, 32, id.server_key, id.keypair); }) ==
          Errc::BadServerSignature);
    auto impostor = test::forge_response(test::key("device"), pk, kNow + 1, s, rng);
    CHECK(code_of([&] { verify_response(impostor, kNow, 32, id.server_key, id.keypair); }) ==
          Errc::BadServerSignature);
  }
  SECTION("a key wrapped for another device") {
    auto env = test::forge_response(server, server.public_key(), kNow + 1, s, rng);
    CHECK(code_of([&] { verify_response(env, kNow, 32, id.server_key, id.keypair); }) == Errc::UnwrapFailure);
  }
  SECTION("t2 far in the future") {
    auto env = test::forge_response(server, pk, kNow + 60'000, s, rng);
    CHECK(code_of([&] { verify_response(env, kNow, 32, id.server_key, id.keypair, {kNow, 30'000}); }) ==
          Errc::ClockSkew);
    CHECK(verify_response(env, kNow, 32, id.server_key, id.keypair, {kNow + 30'000, 30'000}) == s);
    CHECK(verify_response(env, kNow, 32, id.server_key, id.keypair) == s);  // no local clock
  }
  SECTION("garbage") {
    CHECK(code_of([&] { verify_response(Bytes(50, 1), kNow, 32, id.server_key, id.keypair); }) ==
          Errc::MalformedMessage);
  }
}

TEST_CASE("freshness is a strict inequality") {
  OsRandom rng;
  auto id = device();
  const auto& server = test::key("tes");
  // One forged response per t2, checked against every t1.
  const std::vector<std::uint64_t> times = {0, 1, 2, kNow - 1, kNow, kNow + 1, kNow + 1000};
  for (auto t2 : times) {
    auto env = test::forge_response(server, id.keypair.public_key(), t2, Bytes(8, 7), rng);
    for (auto t1 : times) {
      INFO("t1=" << t1 << " t2=" << t2);
      if (t2 > t1) {
        CHECK_NOTHROW(verify_response(env, t1, 8, id.server_key, id.keypair));
      } else {
        CHECK(code_of([&] { verify_response(env, t1, 8, id.server_key, id.keypair); }) == Errc::Stale);
      }
    }
  }
}

TEST_CASE("request_entropy against an in-process server") {
  LocalServer srv;
  server::InProcessTransport inner(*srv.service);
  LatencyTransport transport(inner, srv.clock);
  OsRandom rng;
  auto id = device();
  auto r = request_entropy(id, transport, 64, srv.clock, rng);
  CHECK(r.entropy.size() == 64);
  CHECK(r.attempts == 1);
}

TEST_CASE("request_entropy waits out the throttle") {
  LocalServer srv;
  server::InProcessTransport inner(*srv.service);
  LatencyTransport transport(inner, srv.clock);
  OsRandom rng;
  auto id = device();
  for (int i = 0; i < 5; ++i) request_entropy(id, transport, 16, srv.clock, rng);
  // The bucket is now nearly empty; the next call is throttled, sleeps and retries.
  auto before = srv.clock.now_ms();
  auto r = request_entropy(id, transport, 16, srv.clock, rng);
  CHECK(r.entropy.size() == 16);
  CHECK(r.attempts == 2);
  CHECK(srv.clock.now_ms() - before >= 1000);
}

TEST_CASE("server rejections are not retried") {
  LocalServer srv;
  server::InProcessTransport inner(*srv.service);
  LatencyTransport transport(inner, srv.clock);
  OsRandom rng;
  ClientIdentity wrong_pin{test::key("device"), test::key("device").public_key(), {}};
  // Encrypted under the wrong server key: the TES cannot open it.
  CHECK(code_of([&] { request_entropy(wrong_pin, transport, 16, srv.clock, rng); }) == Errc::DecryptFailure);
  CHECK(srv.service->counters().allowed == 1);
}

TEST_CASE("an unreachable server exhausts the retry budget") {
  OfflineTransport transport;
  ManualClock clock(kNow);
  OsRandom rng;
  CHECK(code_of([&] { request_entropy(device(), transport, 16, clock, rng); }) == Errc::Transport);
  CHECK(transport.calls == 3);
  CHECK(clock.now_ms() == kNow + 1000 + 2000);
}

TEST_CASE("quote reasons have stable names") {
  CHECK(to_string(QuoteReject::Signature) == "sig");
  CHECK(to_string(QuoteReject::Nonce) == "nonce");
  CHECK(to_string(QuoteReject::Measurement) == "measurement");
}

TEST_CASE("server codes map back to typed errors") {
  CHECK(errc_for_server_code("bad-signature") == Errc::BadSignature);
  CHECK(errc_for_server_code("entropy-depleted") == Errc::EntropyDepleted);
  CHECK(errc_for_server_code("hint-mismatch") == Errc::HintMismatch);
  CHECK(errc_for_server_code("what") == Errc::ServerRejected);
}
