#pragma once

// Untrusted CA side of the TES: transport, throttling and dispatch into the
// trusted core. Nothing here handles key material or plaintext entropy; the
// request and response envelopes pass through as opaque bytes.

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "eaas/clock.hpp"
#include "eaas/config.hpp"
#include "eaas/http.hpp"
#include "eaas/log.hpp"
#include "eaas/throttle.hpp"
#include "eaas/trusted_core.hpp"

namespace httplib {
class Server;
}

namespace eaas::server {

inline constexpr std::string_view kEntropyPath = "/v1/entropy";
inline constexpr std::string_view kAttestPath = "/v1/attest";
inline constexpr std::string_view kPubkeyPath = "/v1/pubkey";

struct StatusMapping {
  int http_status;
  std::string_view code;
};

// Total over ta::Status.
StatusMapping map_status(ta::Status status);

struct ServiceCounters {
  std::uint64_t allowed = 0;
  std::uint64_t throttled = 0;
  std::uint64_t depleted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t served = 0;
};

class TesService {
 public:
  TesService(ta::TrustedCore& core, ThrottleConfig throttle, Clock& clock, Logger& log);

  HttpReply handle_entropy(ByteView body);
  HttpReply handle_entropy(ByteView body, std::uint64_t now_ms);
  HttpReply handle_attest(ByteView body);
  HttpReply handle_pubkey();

  // Dispatches by method and path; 404/405 otherwise.
  HttpReply route(std::string_view method, std::string_view path, ByteView body);

  ServiceCounters counters() const;
  // Counters and per-source health, rendered for operators. No buffer bytes.
  pool::PoolStatus pool_status();

 private:
  HttpReply from_ta(const ta::TaResult& result);

  ta::TrustedCore& core_;
  ThrottleTable throttle_;
  Clock& clock_;
  Logger& log_;
  std::atomic<std::uint64_t> allowed_{0}, throttled_{0}, depleted_{0}, rejected_{0}, served_{0};
};

// Routes a TesService through the in-process boundary; used by tests and the
// simulator in place of a socket.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(TesService& service) : service_(service) {}
  HttpReply post(const std::string& path, ByteView body) override {
    return service_.route("POST", path, body);
  }
  HttpReply get(const std::string& path) override { return service_.route("GET", path, {}); }

 private:
  TesService& service_;
};

class HttpServer {
 public:
  HttpServer(TesService& service, std::size_t max_concurrency, Logger& log);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Throws Error{BindFailure}.
  std::uint16_t bind(const std::string& host, std::uint16_t port);
  // Blocks until stop().
  void run();
  // bind + run on a background thread.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  void stop();

 private:
  TesService& service_;
  Logger& log_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

// Everything a running tes-server owns, assembled from a ServerConfig.
struct ServerInstance {
  std::unique_ptr<Clock> clock;
  std::unique_ptr<ta::TrustedCore> core;
  std::unique_ptr<TesService> service;
};

// Throws Error{KeyLoadFailure} or Error{ConfigError}.
ServerInstance build_server(const ServerConfig& config, Logger& log);

}  // namespace eaas::server
