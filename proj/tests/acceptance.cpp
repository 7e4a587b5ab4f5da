// Acceptance run: one PASS/FAIL line per criterion; exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <string>

#include "eaas/client.hpp"
#include "eaas/error.hpp"
#include "eaas/fleet.hpp"
#include "eaas/server.hpp"
#include "eaas/sources.hpp"
#include "eaas/stats.hpp"
#include "forge.hpp"
#include "oracle.hpp"
#include "support.hpp"
#include "tcb.hpp"

using namespace eaas;

namespace {

constexpr std::uint64_t kStart = 1'700'000'000'000;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::optional<Errc> error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::vector<ta::SourceBinding> sensors(std::uint64_t seed, std::uint32_t count, double rate = 1 << 24) {
  std::vector<ta::SourceBinding> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    out.push_back({{"sensor-" + std::to_string(i), 1.0, rate}, pool::simulated_sensor_supplier(seed * 16 + i)});
  }
  return out;
}

// Shared by criteria 1 and 9.
std::string g_criterion1_log;
Bytes g_criterion1_secrets;

Verdict round_trips() {
  Verdict v;
  ManualClock clock(kStart);
  std::mutex mutex;
  Logger log(
      [&](LogLevel level, std::string_view msg) {
        std::lock_guard lock(mutex);
        g_criterion1_log += std::string(to_string(level)) + " " + std::string(msg) + "\n";
      },
      LogLevel::Debug);
  ta::TrustedCore core({}, test::key("tes"), sensors(1, 2), clock, std::make_unique<OsRandom>());
  server::TesService service(core, {}, clock, log);
  server::InProcessTransport transport(service);

  std::vector<client::ClientIdentity> fleet;
  for (int c = 0; c < 5; ++c) fleet.push_back({test::key("device-" + std::to_string(c)), test::key("tes").public_key(), {}});

  OsRandom rng;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& id = fleet[static_cast<std::size_t>(i) % fleet.size()];
    if (i % fleet.size() == 0) clock.advance(1000);
    auto p = client::build_request(id, 32, clock, rng);
    clock.advance(1);
    auto reply = transport.post(std::string(server::kEntropyPath), p.body());
    clock.advance(1);
    if (reply.status != 200) {
      ++failures;
      continue;
    }
    try {
      auto env = wire::decode_envelope(reply.body);
      auto s = client::verify_response(reply.body, p.t1, 32, id.server_key, id.keypair, {clock.now_ms(), 30'000});
      if (s.size() != 32) ++failures;
      append(g_criterion1_secrets, s);
      append(g_criterion1_secrets, crypto::unwrap_key(id.keypair, env.wrapped_key).bytes());
    } catch (const Error&) {
      ++failures;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(failures == 0, std::to_string(failures) + " verification failures");
  v.require(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  if (v.pass) v.detail = "1000/1000 verified in " + std::to_string(static_cast<int>(secs + 0.5)) + " s";
  return v;
}

Verdict tamper_matrix() {
  Verdict v;
  using sim::ActionKind;
  using sim::Direction;
  const std::vector<std::pair<ActionKind, Direction>> cells = {
      {ActionKind::TamperPk, Direction::Request},          {ActionKind::TamperDeltaS, Direction::Request},
      {ActionKind::TamperSig1, Direction::Request},        {ActionKind::TamperHint, Direction::Request},
      {ActionKind::TamperWrappedKey, Direction::Request},  {ActionKind::TamperNonce, Direction::Request},
      {ActionKind::TamperCiphertext, Direction::Request},  {ActionKind::TamperWrappedKey, Direction::Response},
      {ActionKind::TamperNonce, Direction::Response},      {ActionKind::TamperCiphertext, Direction::Response},
      {ActionKind::TamperSig2, Direction::Response},
  };
  constexpr std::uint32_t kTrials = 100;
  std::vector<sim::AdversaryAction> actions;
  std::uint32_t target = 0;
  for (const auto& [kind, dir] : cells) {
    for (std::uint32_t t = 0; t < kTrials; ++t) actions.push_back({kind, target++, dir, t});
  }
  sim::ScenarioConfig scenario;
  scenario.clients = 4;
  scenario.requests_per_client = (target + 3) / 4;
  scenario.interval_ms = 1000;
  auto report = sim::run_adversary(scenario, actions, 2024);
  std::size_t wrong = 0, leaked = 0;
  for (const auto& e : report.effects) {
    if (!e.observed) ++leaked;
    if (e.observed != sim::designated_error(e.action.kind, e.action.direction)) ++wrong;
  }
  v.require(leaked == 0, std::to_string(leaked) + " tampered exchanges returned entropy");
  v.require(wrong == 0, std::to_string(wrong) + " cells produced the wrong error");

  // A response ciphertext altered under a valid server signature fails authentication.
  OsRandom rng;
  const auto& dev = test::key("device-0");
  std::size_t open_ok = 0;
  for (std::uint32_t t = 0; t < kTrials; ++t) {
    auto env = test::forge_response(test::key("tes"), dev.public_key(), kStart + 1, Bytes(32, 1), rng,
                                    {.flip_ciphertext = true});
    auto err = error_of([&] { client::verify_response(env, kStart, 32, test::key("tes").public_key(), dev); });
    open_ok += err == Errc::OpenFailure;
  }
  v.require(open_ok == kTrials, "signed ciphertext flips: " + std::to_string(open_ok) + "/100 OpenFailure");
  if (v.pass) {
    v.detail = std::to_string(cells.size()) + " cells x 100 trials plus 100 signed-ciphertext flips, 0 returned entropy";
  }
  return v;
}

Verdict freshness() {
  Verdict v;
  OsRandom rng;
  const auto& dev = test::key("device-0");
  const auto server_pk = test::key("tes").public_key();
  std::vector<std::uint64_t> times = {0, 1, kStart - 1000, kStart - 1, kStart, kStart + 1, kStart + 1000,
                                      std::numeric_limits<std::uint64_t>::max()};
  std::mt19937_64 prng(3);
  for (int i = 0; i < 12; ++i) times.push_back(kStart + prng() % 100'000);
  std::size_t pairs = 0;
  for (auto t2 : times) {
    auto env = test::forge_response(test::key("tes"), dev.public_key(), t2, Bytes(16, 9), rng);
    for (auto t1 : times) {
      auto err = error_of([&] { client::verify_response(env, t1, 16, server_pk, dev); });
      ++pairs;
      if (t2 <= t1) {
        v.require(err == Errc::Stale, "t1=" + std::to_string(t1) + " t2=" + std::to_string(t2) + " accepted");
      } else {
        v.require(!err, "fresh response rejected");
      }
    }
  }

  // Replays in simulation: each response replayed against a later request of the same client.
  std::vector<sim::AdversaryAction> actions;
  for (std::uint32_t i = 1; i < 100; i += 2) actions.push_back({sim::ActionKind::ReplayResponse, i, sim::Direction::Response, {}});
  sim::ScenarioConfig scenario;
  scenario.clients = 1;
  scenario.requests_per_client = 100;
  scenario.interval_ms = 1000;
  auto report = sim::run_adversary(scenario, actions, 77);
  std::size_t stale = 0;
  for (const auto& e : report.effects) stale += e.observed == Errc::Stale;
  v.require(stale == actions.size(), std::to_string(stale) + "/" + std::to_string(actions.size()) + " replays stale");
  if (v.pass) v.detail = std::to_string(pairs) + " (t1, t2) pairs, " + std::to_string(stale) + " simulated replays";
  return v;
}

Verdict throttling() {
  Verdict v;
  server::ThrottleTable table;
  test::BucketOracle oracle(5, 1);
  std::size_t grants = 0;
  auto trace = test::burst_trace(10000, 3, 99);
  for (const auto& ev : trace) {
    wire::Fingerprint fp;
    fp.id[0] = static_cast<std::uint8_t>(ev.who);
    auto got = table.check(fp, ev.t_ms);
    auto want = oracle.event(ev.who, ev.t_ms);
    v.require(got.allowed == want.allowed && got.retry_after_s == want.retry_after_s,
              "diverged at t=" + std::to_string(ev.t_ms));
    grants += got.allowed;
  }
  if (v.pass) v.detail = "10000 events, " + std::to_string(grants) + " grants, identical decisions";
  return v;
}

Verdict conservation() {
  Verdict v;
  ManualClock clock(0);
  pool::EntropyPool p(clock);
  p.register_source({"a", 0.8, 8192}, pool::simulated_sensor_supplier(1));
  p.register_source({"b", 0.25, 4096}, pool::simulated_sensor_supplier(2));
  std::mt19937_64 rng(5);
  std::size_t refusals = 0;
  for (int step = 0; step < 10000; ++step) {
    switch (rng() % 4) {
      case 0:
        error_of([&] { p.harvest(rng() % 8192, std::chrono::milliseconds(rng() % 20)); });
        break;
      case 1:
      case 2: {
        auto credit = p.status().credited_bits;
        auto n = static_cast<std::uint32_t>(rng() % 256);
        auto err = error_of([&] { p.extract(n); });
        if (8ull * n > credit) {
          v.require(err == Errc::InsufficientCredit, "over-credit extract not refused");
          ++refusals;
        } else {
          v.require(!err, "within-credit extract refused");
        }
        break;
      }
      default: clock.advance(rng() % 200); break;
    }
    auto st = p.status();
    v.require(st.total_extracted_bytes * 8 <= st.total_credited_bits, "extracted more than credited");
    v.require(st.credited_bits <= 8 * st.buffered_bytes, "credit exceeds buffered bits");
  }
  auto st = p.status();
  if (v.pass) {
    v.detail = "10000 steps, " + std::to_string(st.total_extracted_bytes) + " bytes out of " +
               std::to_string(st.total_credited_bits / 8) + " credited, " + std::to_string(refusals) + " refusals";
  }
  return v;
}

Verdict hybrid_size() {
  Verdict v;
  OsRandom rng;
  const auto& dev = test::key("device-0");
  const std::size_t payload = wire::kDefaultMaxDeltaS + wire::kResponsePayloadHeader;
  v.require(payload == 4105, "payload size");
  v.require(crypto::kOaepCapacity == 318, "OAEP capacity");
  v.require(payload > crypto::kOaepCapacity, "payload fits OAEP");
  v.require(error_of([&] { crypto::oaep_encrypt(dev.public_key(), Bytes(payload, 1), rng); }) == Errc::FieldOutOfRange,
            "direct RSA-OAEP of the payload was not refused");
  v.require(!error_of([&] { crypto::oaep_encrypt(dev.public_key(), Bytes(318, 1), rng); }), "318 bytes refused");

  Bytes s(wire::kDefaultMaxDeltaS);
  rng.fill(s);
  auto env = test::forge_response(test::key("tes"), dev.public_key(), kStart + 1, s, rng);
  auto decoded = wire::decode_envelope(env);
  v.require(decoded.ciphertext.size() == payload + wire::kTagSize, "sealed size");
  auto got = client::verify_response(env, kStart, wire::kDefaultMaxDeltaS, test::key("tes").public_key(), dev);
  v.require(got == s, "round trip mismatch");
  if (v.pass) v.detail = "4105-byte payload in one envelope; OAEP bound 318 bytes";
  return v;
}

Bytes deliver(ta::TrustedCore& core, ManualClock& clock, const client::ClientIdentity& id, std::size_t total,
              std::uint32_t chunk, RandomSource& rng) {
  Logger quiet([](LogLevel, std::string_view) {});
  server::TesService service(core, {.enabled = false}, clock, quiet);
  server::InProcessTransport transport(service);
  Bytes out;
  while (out.size() < total) {
    auto p = client::build_request(id, chunk, clock, rng, chunk);
    clock.advance(1);
    auto reply = transport.post(std::string(server::kEntropyPath), p.body());
    clock.advance(1);
    if (reply.status != 200) throw Error(client::errc_for_server_code(reply.error_code()), "delivery");
    append(out, client::verify_response(reply.body, p.t1, chunk, id.server_key, id.keypair));
  }
  out.resize(total);
  return out;
}

Verdict statistics() {
  Verdict v;
  constexpr std::uint32_t kChunk = 1 << 14;
  client::ClientIdentity id{test::key("device-0"), test::key("tes").public_key(), {}};
  ta::TaConfig cfg;
  cfg.max_delta_s = kChunk;
  cfg.harvest_deadline = std::chrono::milliseconds(0);
  std::size_t passed = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    ManualClock clock(kStart);
    SeededRandom rng(seed);
    ta::TrustedCore core(cfg, test::key("tes"), sensors(seed, 2), clock, std::make_unique<SeededRandom>(seed + 1000));
    passed += stats::all_pass(stats::stats_suite(deliver(core, clock, id, stats::kMinInput, kChunk, rng)));
  }
  v.require(passed >= 100, std::to_string(passed) + "/100 seeded runs passed");

  ManualClock clock(kStart);
  OsRandom rng;
  auto sources = sensors(500, 2);
  sources.insert(sources.begin() + 1, {{"stuck", 1.0, 1 << 24}, pool::constant_supplier(0x00)});
  ta::TrustedCore core(cfg, test::key("tes"), std::move(sources), clock, std::make_unique<OsRandom>());
  auto out = deliver(core, clock, id, stats::kMinInput, kChunk, rng);
  auto st = ta::decode_pool_status(core.invoke(ta::make_command(ta::Command::PoolStatus)).payload);
  const auto& stuck = st.sources[1];
  v.require(stuck.degraded_at_block && *stuck.degraded_at_block <= 5, "stuck source not degraded within 5 blocks");
  v.require(stuck.credited_bits == 0, "stuck source earned credit");
  v.require(stats::all_pass(stats::stats_suite(out)), "output with a stuck source failed");
  if (v.pass) {
    v.detail = std::to_string(passed) + "/100 seeded MiB pass; stuck source degraded at block " +
               std::to_string(*stuck.degraded_at_block) + ", now " + std::string(pool::to_string(stuck.health));
  }
  return v;
}

Verdict attestation() {
  Verdict v;
  ManualClock clock(kStart);
  ta::TaConfig cfg;
  cfg.sm_measurement = sha256(as_bytes("platform manifest"));
  cfg.ta_measurement = sha256(as_bytes("trusted application"));
  ta::TrustedCore core(cfg, test::key("tes"), {}, clock, std::make_unique<OsRandom>());
  OsRandom rng;
  auto nonce = rng.bytes(32);
  auto quote = wire::decode_quote(
      core.invoke(ta::make_command(ta::Command::Attest, ta::attest_payload(kStart, nonce))).payload);
  const auto pk = test::key("tes").public_key();
  auto check = [&](const wire::AttestationQuote& q, ByteView n, ByteView sm, ByteView ta) {
    return client::verify_quote(q, n, sm, ta, pk);
  };
  v.require(check(quote, nonce, cfg.sm_measurement, cfg.ta_measurement).accepted, "issued quote rejected");

  std::set<client::QuoteReject> seen;
  auto expect = [&](client::QuoteVerdict verdict, client::QuoteReject reason, const std::string& what) {
    v.require(!verdict.accepted && verdict.reason == reason, what);
    if (verdict.reason) seen.insert(*verdict.reason);
  };
  expect(check(quote, rng.bytes(32), cfg.sm_measurement, cfg.ta_measurement), client::QuoteReject::Nonce,
         "nonce substitution");
  expect(check(quote, nonce, cfg.sm_measurement, sha256(as_bytes("other"))), client::QuoteReject::Measurement,
         "ta measurement substitution");
  expect(check(quote, nonce, sha256(as_bytes("other")), cfg.ta_measurement), client::QuoteReject::Measurement,
         "sm measurement substitution");
  auto forged = quote;
  forged.signature = crypto::sign(test::key("device-0"), crypto::kQuoteTag, wire::quote_signed_bytes(quote), rng);
  expect(check(forged, nonce, cfg.sm_measurement, cfg.ta_measurement), client::QuoteReject::Signature,
         "signature substitution");
  auto edited = quote;
  edited.ta_measurement[0] ^= 1;
  expect(check(edited, nonce, cfg.sm_measurement, edited.ta_measurement), client::QuoteReject::Signature,
         "edited measurement under the old signature");
  v.require(seen.size() == 3, "rejection kinds exercised: " + std::to_string(seen.size()));
  if (v.pass) v.detail = "issued quote accepted; 3/3 rejection kinds";
  return v;
}

Verdict tcb_boundary() {
  Verdict v;
  auto core_members = test::exported_members("eaas::ta::TrustedCore");
  auto service_members = test::exported_members("eaas::server::TesService");
  v.require(!core_members.empty() && !service_members.empty(), "symbol enumeration failed");
  for (const auto& m : core_members) v.require(test::kTrustedCoreSurface.count(m), "unexpected core export " + m);
  for (const auto& m : service_members) v.require(test::kServiceSurface.count(m), "unexpected service export " + m);

  v.require(!g_criterion1_log.empty(), "no log captured");
  v.require(!g_criterion1_secrets.empty(), "no secrets recorded");
  const auto log = as_bytes(g_criterion1_log);
  v.require(!test::shares_window(log, g_criterion1_secrets, 16), "raw secret bytes in log");
  for (std::size_t i = 0; i + 8 <= g_criterion1_secrets.size(); i += 8) {
    if (g_criterion1_log.find(to_hex(ByteView(g_criterion1_secrets).subspan(i, 8))) != std::string::npos) {
      v.require(false, "hex-encoded secret in log");
      break;
    }
  }
  v.require(!test::leaks_key(log, test::key("tes")), "key material in log");
  if (v.pass) {
    v.detail = std::to_string(core_members.size()) + " core and " + std::to_string(service_members.size()) +
               " service members enumerated; " + std::to_string(g_criterion1_log.size()) + " log bytes clean";
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"end-to-end round trips", round_trips}, {"tamper matrix", tamper_matrix},
      {"freshness", freshness},                {"throttle oracle", throttling},
      {"extraction conservation", conservation}, {"hybrid size bound", hybrid_size},
      {"statistical suite", statistics},       {"attestation", attestation},
      {"trust boundary", tcb_boundary},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %-26s %s  %s (%.1f s)\n", n, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  return failures;
}
