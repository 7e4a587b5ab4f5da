// tes-server: serves /v1/entropy, /v1/attest and /v1/pubkey until SIGINT or SIGTERM.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "eaas/config.hpp"
#include "eaas/error.hpp"
#include "eaas/log.hpp"
#include "eaas/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Entropy-as-a-service server"};
  std::string config_path;
  bool verbose = false;
  app.add_option("--config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", verbose, "log debug messages");
  CLI11_PARSE(app, argc, argv);

  // Blocked before any thread starts so only sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  eaas::Logger log;
  if (verbose) log.set_level(eaas::LogLevel::Debug);
  try {
    auto config = eaas::server::load_server_config(config_path);
    auto instance = eaas::server::build_server(config, log);
    eaas::server::HttpServer http(*instance.service, config.max_concurrency, log);
    auto port = http.start(config.listen_host, config.listen_port);
    std::cout << "listening on " << config.listen_host << ":" << port << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    log.info(std::string("received ") + (sig == SIGINT ? "SIGINT" : "SIGTERM") + ", shutting down");
    http.stop();
    auto c = instance.service->counters();
    log.info("served " + std::to_string(c.served) + " throttled " + std::to_string(c.throttled) + " rejected " +
             std::to_string(c.rejected) + " depleted " + std::to_string(c.depleted));
  } catch (const eaas::Error& e) {
    std::cerr << "tes-server: " << e.what() << '\n';
    return e.code() == eaas::Errc::ConfigError ? 2 : 1;
  }
  return 0;
}
