#pragma once

// Flat "key = value" configuration files, shared by the server and the
// simulator. Lines starting with '#' are comments.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eaas/pool.hpp"
#include "eaas/sources.hpp"
#include "eaas/throttle.hpp"

namespace eaas {

class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, std::string fallback) const;
  // Throw Error{ConfigError} on unparsable values.
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Keys under "<prefix>." grouped by their next path segment, in file order.
  std::vector<std::string> groups(const std::string& prefix) const;

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

namespace server {

enum class ClockMode { System, Injected };

struct ServerConfig {
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 8443;
  std::uint32_t max_delta_s = 4096;
  ThrottleConfig throttle;
  std::vector<pool::SourceSpec> sources;
  std::size_t min_sources = 1;
  std::filesystem::path key_file = "tes_key.der";
  bool generate_key = false;
  std::optional<std::filesystem::path> public_key_out;
  ClockMode clock_mode = ClockMode::System;
  std::uint64_t injected_start_ms = 0;
  std::uint64_t harvest_deadline_ms = 2000;
  std::optional<std::filesystem::path> platform_manifest;
  std::optional<std::filesystem::path> ta_artifact;  // defaults to the running executable
  std::size_t max_concurrency = 8;
};

// Applies EAAS_LISTEN ("host:port") and EAAS_MAX_DELTA_S on top of `file`.
// Throws Error{ConfigError} when any numeric field is non-positive.
ServerConfig parse_server_config(const KeyValueFile& file);
ServerConfig load_server_config(const std::filesystem::path& path);
void apply_env_overrides(ServerConfig& config);

// Parses "source.<id>.*" groups.
std::vector<pool::SourceSpec> parse_sources(const KeyValueFile& file, const std::filesystem::path& base_dir = {});

}  // namespace server
}  // namespace eaas
