// eaas-client: provision a device store, fetch entropy, check an attestation quote.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "eaas/client.hpp"
#include "eaas/clock.hpp"
#include "eaas/error.hpp"
#include "eaas/http.hpp"
#include "eaas/server.hpp"

namespace {

using namespace eaas;

int provision_cmd(const std::string& store, const std::string& server_key) {
  OsRandom rng;
  std::optional<std::filesystem::path> key;
  if (!server_key.empty()) key = server_key;
  auto id = client::provision(store, key, rng);
  std::cout << "fingerprint " << to_hex(view(id.fingerprint().id)) << '\n';
  return 0;
}

int fetch_cmd(const std::string& store, const std::string& url, std::uint32_t bytes, const std::string& out,
              std::uint32_t max_delta_s) {
  auto id = client::load_identity(store);
  HttpTransport transport(url);
  SystemClock clock;
  OsRandom rng;
  client::FetchOptions options;
  options.max_delta_s = max_delta_s;
  auto result = client::request_entropy(id, transport, bytes, clock, rng, options);
  if (out.empty()) {
    std::cout << to_hex(result.entropy) << '\n';
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(result.entropy.data()), static_cast<std::streamsize>(result.entropy.size()));
    if (!f) throw Error(Errc::Io, "cannot write " + out);
  }
  return 0;
}

crypto::PublicKey attestation_key(Transport& transport, const std::string& server_key, const std::string& store) {
  if (!server_key.empty()) return crypto::load_public_key(server_key);
  if (!store.empty()) return client::load_identity(store).server_key;
  auto reply = transport.get(std::string(server::kPubkeyPath));
  if (reply.status != 200) throw Error(Errc::ServerRejected, "pubkey: " + reply.error_code());
  std::cerr << "warning: trusting the key served by " << server::kPubkeyPath << " for this check only\n";
  return crypto::PublicKey::from_der(reply.body);
}

int attest_cmd(const std::string& url, const std::string& expect_ta, const std::string& expect_sm,
               const std::string& server_key, const std::string& store) {
  const Bytes ta = from_hex(expect_ta);
  const Bytes sm = from_hex(expect_sm);
  if (ta.size() != wire::kMeasurementSize || sm.size() != wire::kMeasurementSize) {
    throw Error(Errc::ConfigError, "measurements are 32-byte hex strings");
  }
  HttpTransport transport(url);
  auto key = attestation_key(transport, server_key, store);
  OsRandom rng;
  const Bytes nonce = rng.bytes(32);
  auto reply = transport.post(std::string(server::kAttestPath), nonce);
  if (reply.status != 200) throw Error(Errc::ServerRejected, "attest: " + reply.error_code());
  auto quote = wire::decode_quote(reply.body);
  auto verdict = client::verify_quote(quote, nonce, sm, ta, key);
  if (!verdict.accepted) {
    std::cout << "rejected " << client::to_string(*verdict.reason) << '\n';
    return 1;
  }
  std::cout << "accepted quote_time " << quote.quote_time << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-as-a-service device client"};
  app.require_subcommand(1);

  std::string store, server_key, url, out, expect_ta, expect_sm;
  std::uint32_t bytes = 32;
  std::uint32_t max_delta_s = wire::kDefaultMaxDeltaS;

  auto* provision = app.add_subcommand("provision", "create a device key and pin the server key");
  provision->add_option("--store", store, "device store directory")->required();
  provision->add_option("--server-key", server_key, "server public key (DER or PEM)");

  auto* fetch = app.add_subcommand("fetch", "request entropy from a server");
  fetch->add_option("--store", store, "device store directory")->required();
  fetch->add_option("--url", url, "server base URL, e.g. http://127.0.0.1:8443")->required();
  fetch->add_option("--bytes", bytes, "entropy bytes to request")->required()->check(CLI::PositiveNumber);
  fetch->add_option("--out", out, "write raw bytes here instead of hex to stdout");
  fetch->add_option("--max-delta-s", max_delta_s, "largest request the server accepts");

  auto* attest = app.add_subcommand("attest", "verify the server's attestation quote");
  attest->add_option("--url", url, "server base URL")->required();
  attest->add_option("--expect-ta", expect_ta, "expected trusted application measurement (hex)")->required();
  attest->add_option("--expect-sm", expect_sm, "expected platform measurement (hex)")->required();
  auto* key_opt = attest->add_option("--server-key", server_key, "attestation public key file");
  attest->add_option("--store", store, "use the server key pinned in this store")->excludes(key_opt);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*provision) return provision_cmd(store, server_key);
    if (*fetch) return fetch_cmd(store, url, bytes, out, max_delta_s);
    return attest_cmd(url, expect_ta, expect_sm, server_key, store);
  } catch (const Error& e) {
    std::cerr << "eaas-client: " << e.what() << '\n';
    return e.code() == Errc::ConfigError ? 2 : 1;
  }
}
