#include "eaas/server.hpp"

#include <httplib.h>

#include "eaas/error.hpp"
#include "eaas/sources.hpp"

namespace eaas::server {

namespace {

HttpReply error_reply(int status, std::string_view code) {
  HttpReply r;
  r.status = status;
  r.content_type = "text/plain";
  r.body = to_bytes(code);
  return r;
}

std::string short_fp(const wire::Fingerprint& fp) { return to_hex(ByteView(fp.id).first(8)); }

}  // namespace

StatusMapping map_status(ta::Status status) {
  switch (status) {
    case ta::Status::Ok: return {200, "ok"};
    case ta::Status::Malformed: return {400, "malformed"};
    case ta::Status::DecryptFailure: return {400, "decrypt-failure"};
    case ta::Status::BadSignature: return {400, "bad-signature"};
    case ta::Status::HintMismatch: return {400, "hint-mismatch"};
    case ta::Status::FieldOutOfRange: return {400, "out-of-range"};
    case ta::Status::EntropyDepleted: return {503, "entropy-depleted"};
    case ta::Status::NoSources: return {503, "no-sources"};
    case ta::Status::UnknownCommand: return {500, "unknown-command"};
    case ta::Status::Internal: return {500, "internal"};
  }
  return {500, "internal"};
}

TesService::TesService(ta::TrustedCore& core, ThrottleConfig throttle, Clock& clock, Logger& log)
    : core_(core), throttle_(throttle), clock_(clock), log_(log) {}

HttpReply TesService::from_ta(const ta::TaResult& result) {
  if (result.status == ta::Status::Ok) {
    HttpReply r;
    r.status = 200;
    r.body = result.payload;
    return r;
  }
  auto m = map_status(result.status);
  return error_reply(m.http_status, m.code);
}

HttpReply TesService::handle_entropy(ByteView body) { return handle_entropy(body, clock_.now_ms()); }

HttpReply TesService::handle_entropy(ByteView body, std::uint64_t now_ms) {
  wire::EntropyPost post;
  try {
    post = wire::decode_entropy_post(body);
  } catch (const Error& e) {
    ++rejected_;
    log_.info(std::string("entropy request rejected before throttle: ") + e.what());
    return error_reply(400, "malformed");
  }

  // Throttle before the trusted core sees anything, so floods cost no TA work.
  const auto decision = throttle_.check(post.hint, now_ms);
  if (!decision.allowed) {
    ++throttled_;
    log_.warn("throttled fp=" + short_fp(post.hint) + " retry_after=" + std::to_string(decision.retry_after_s));
    auto r = error_reply(429, "throttled");
    r.headers["Retry-After"] = std::to_string(decision.retry_after_s);
    return r;
  }
  ++allowed_;

  auto result = core_.invoke(
      ta::make_command(ta::Command::HandleRequest, ta::handle_request_payload(now_ms, post.hint, post.envelope)));
  if (result.status == ta::Status::Ok) {
    ++served_;
  } else if (result.status == ta::Status::EntropyDepleted || result.status == ta::Status::NoSources) {
    ++depleted_;
  } else {
    ++rejected_;
  }
  log_.info("entropy fp=" + short_fp(post.hint) + " status=" + std::string(ta::to_string(result.status)) +
            " bytes_out=" + std::to_string(result.payload.size()));
  return from_ta(result);
}

HttpReply TesService::handle_attest(ByteView body) {
  if (body.size() != 32) return error_reply(400, "malformed");
  auto result = core_.invoke(ta::make_command(ta::Command::Attest, ta::attest_payload(clock_.now_ms(), body)));
  log_.info("attest status=" + std::string(ta::to_string(result.status)));
  return from_ta(result);
}

HttpReply TesService::handle_pubkey() { return from_ta(core_.invoke(ta::make_command(ta::Command::GetPubkey))); }

HttpReply TesService::route(std::string_view method, std::string_view path, ByteView body) {
  const bool post = method == "POST";
  const bool get = method == "GET";
  if (path == kEntropyPath) return post ? handle_entropy(body) : error_reply(405, "method-not-allowed");
  if (path == kAttestPath) return post ? handle_attest(body) : error_reply(405, "method-not-allowed");
  if (path == kPubkeyPath) return get ? handle_pubkey() : error_reply(405, "method-not-allowed");
  return error_reply(404, "not-found");
}

ServiceCounters TesService::counters() const {
  return {allowed_.load(), throttled_.load(), depleted_.load(), rejected_.load(), served_.load()};
}

pool::PoolStatus TesService::pool_status() {
  auto result = core_.invoke(ta::make_command(ta::Command::PoolStatus));
  if (result.status != ta::Status::Ok) throw Error(Errc::Internal, "pool status unavailable");
  return ta::decode_pool_status(result.payload);
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(TesService& service, std::size_t max_concurrency, Logger& log)
    : service_(service), log_(log), http_(std::make_unique<httplib::Server>()) {
  http_->new_task_queue = [max_concurrency] { return new httplib::ThreadPool(max_concurrency); };
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    auto reply = service_.route(req.method, req.path, as_bytes(req.body));
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(std::string(reply.body.begin(), reply.body.end()), reply.content_type);
  };
  http_->Post(std::string(kEntropyPath), forward);
  http_->Post(std::string(kAttestPath), forward);
  http_->Get(std::string(kPubkeyPath), forward);
  http_->set_payload_max_length(1 << 20);
  // SO_REUSEPORT (the library default) would let a second server share the port.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
}

HttpServer::~HttpServer() { stop(); }

std::uint16_t HttpServer::bind(const std::string& host, std::uint16_t port) {
  int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::BindFailure, host + ":" + std::to_string(port));
  log_.info("listening on " + host + ":" + std::to_string(bound));
  return static_cast<std::uint16_t>(bound);
}

void HttpServer::run() { http_->listen_after_bind(); }

std::uint16_t HttpServer::start(const std::string& host, std::uint16_t port) {
  auto bound = bind(host, port);
  thread_ = std::thread([this] { run(); });
  http_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

// ---------------------------------------------------------------------------

ServerInstance build_server(const ServerConfig& config, Logger& log) {
  ServerInstance inst;
  if (config.clock_mode == ClockMode::Injected) {
    inst.clock = std::make_unique<ManualClock>(config.injected_start_ms);
  } else {
    inst.clock = std::make_unique<SystemClock>();
  }

  ta::TaConfig ta_config;
  ta_config.max_delta_s = config.max_delta_s;
  ta_config.harvest_deadline = std::chrono::milliseconds(config.harvest_deadline_ms);
  ta_config.pool_options.min_sources = config.min_sources;
  try {
    ta_config.sm_measurement = config.platform_manifest ? ta::measure_file(*config.platform_manifest) : sha256({});
    ta_config.ta_measurement = ta::measure_file(config.ta_artifact.value_or("/proc/self/exe"));
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.what());
  }

  std::vector<ta::SourceBinding> bindings;
  for (const auto& spec : config.sources) bindings.push_back({spec.descriptor, pool::make_supplier(spec)});
  if (config.sources.size() < 2) log.warn("fewer than two entropy sources configured");

  inst.core = ta::TrustedCore::open(ta_config, config.key_file, config.generate_key, std::move(bindings),
                                    *inst.clock, std::make_unique<OsRandom>());
  if (config.public_key_out) {
    auto pub = inst.core->invoke(ta::make_command(ta::Command::GetPubkey));
    crypto::save_public_key(crypto::PublicKey::from_der(pub.payload), *config.public_key_out);
  }
  inst.service = std::make_unique<TesService>(*inst.core, config.throttle, *inst.clock, log);
  log.info("ta measurement " + to_hex(view(ta_config.ta_measurement)));
  log.info("sm measurement " + to_hex(view(ta_config.sm_measurement)));
  return inst;
}

}  // namespace eaas::server
