#include "eaas/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eaas/error.hpp"

namespace eaas {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text) {
  KeyValueFile kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto content = trim(line);
    if (content.empty() || content[0] == '#') continue;
    auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(std::string_view(content).substr(0, eq));
    auto value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw Error(Errc::ConfigError, "line " + std::to_string(lineno) + ": empty key");
    if (!kv.values_.contains(key)) kv.order_.push_back(key);
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, std::string fallback) const {
  return get(key).value_or(std::move(fallback));
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw Error(Errc::ConfigError, key + ": not an unsigned integer: " + *v);
  }
  return out;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  double out = std::strtod(v->c_str(), &end);
  if (v->empty() || end != v->c_str() + v->size()) throw Error(Errc::ConfigError, key + ": not a number: " + *v);
  return out;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "on" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "off" || *v == "0") return false;
  throw Error(Errc::ConfigError, key + ": not a boolean: " + *v);
}

std::vector<std::string> KeyValueFile::groups(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string p = prefix + ".";
  for (const auto& key : order_) {
    if (key.rfind(p, 0) != 0) continue;
    auto rest = key.substr(p.size());
    auto dot = rest.find('.');
    if (dot == std::string::npos) continue;
    auto group = rest.substr(0, dot);
    if (std::find(out.begin(), out.end(), group) == out.end()) out.push_back(group);
  }
  return out;
}

namespace server {

std::vector<pool::SourceSpec> parse_sources(const KeyValueFile& file, const std::filesystem::path& base_dir) {
  std::vector<pool::SourceSpec> out;
  for (const auto& id : file.groups("source")) {
    const std::string p = "source." + id + ".";
    pool::SourceSpec spec;
    spec.descriptor.source_id = id;
    spec.kind = pool::parse_source_kind(file.get_or(p + "kind", "os-random"));
    spec.descriptor.declared_density = file.get_double(p + "density", 1.0);
    spec.descriptor.max_rate = file.get_double(p + "max_rate", 1 << 20);
    if (!(spec.descriptor.declared_density > 0 && spec.descriptor.declared_density <= 1)) {
      throw Error(Errc::ConfigError, p + "density must be in (0, 1]");
    }
    if (!(spec.descriptor.max_rate > 0)) throw Error(Errc::ConfigError, p + "max_rate must be positive");
    if (auto f = file.get(p + "file")) {
      std::filesystem::path path(*f);
      spec.replay_file = path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    } else if (spec.kind == pool::SourceKind::FileReplay) {
      throw Error(Errc::ConfigError, p + "file is required for file-replay");
    }
    auto value = file.get_u64(p + "value", 0);
    if (value > 255) throw Error(Errc::ConfigError, p + "value must be a byte");
    spec.constant_byte = static_cast<std::uint8_t>(value);
    spec.seed = file.get_u64(p + "seed", 0);
    out.push_back(std::move(spec));
  }
  return out;
}

namespace {

void parse_listen(const std::string& listen, ServerConfig& cfg) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::ConfigError, "listen must be host:port");
  cfg.listen_host = listen.substr(0, colon);
  unsigned port = 0;
  auto portstr = listen.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(portstr.data(), portstr.data() + portstr.size(), port);
  if (ec != std::errc{} || ptr != portstr.data() + portstr.size() || port == 0 || port > 65535) {
    throw Error(Errc::ConfigError, "bad listen port '" + portstr + "'");
  }
  cfg.listen_port = static_cast<std::uint16_t>(port);
}

void validate(const ServerConfig& cfg) {
  if (cfg.max_delta_s == 0) throw Error(Errc::ConfigError, "max_delta_s must be positive");
  if (cfg.max_concurrency == 0) throw Error(Errc::ConfigError, "max_concurrency must be positive");
  if (cfg.throttle.enabled && (!(cfg.throttle.capacity > 0) || !(cfg.throttle.refill_per_sec > 0))) {
    throw Error(Errc::ConfigError, "throttle capacity and rate must be positive");
  }
  if (cfg.sources.empty()) throw Error(Errc::ConfigError, "at least one source.<id>.* block is required");
  if (cfg.min_sources == 0) throw Error(Errc::ConfigError, "min_sources must be positive");
}

}  // namespace

ServerConfig parse_server_config(const KeyValueFile& file) {
  ServerConfig cfg;
  if (auto listen = file.get("listen")) parse_listen(*listen, cfg);
  auto max_delta = file.get_u64("max_delta_s", cfg.max_delta_s);
  if (max_delta > 0xffffffffull) throw Error(Errc::ConfigError, "max_delta_s too large");
  cfg.max_delta_s = static_cast<std::uint32_t>(max_delta);

  auto throttle = file.get_or("throttle", "on");
  cfg.throttle.enabled = throttle != "off";
  cfg.throttle.capacity = file.get_double("throttle_capacity", cfg.throttle.capacity);
  cfg.throttle.refill_per_sec = file.get_double("throttle_rate", cfg.throttle.refill_per_sec);

  cfg.key_file = file.get_or("key_file", cfg.key_file.string());
  cfg.generate_key = file.get_bool("generate_key", cfg.generate_key);
  if (auto p = file.get("public_key_out")) cfg.public_key_out = *p;
  auto mode = file.get_or("clock", "system");
  if (mode == "system") {
    cfg.clock_mode = ClockMode::System;
  } else if (mode == "injected") {
    cfg.clock_mode = ClockMode::Injected;
  } else {
    throw Error(Errc::ConfigError, "clock must be system or injected");
  }
  cfg.injected_start_ms = file.get_u64("clock_start_ms", cfg.injected_start_ms);
  cfg.harvest_deadline_ms = file.get_u64("harvest_deadline_ms", cfg.harvest_deadline_ms);
  if (auto p = file.get("platform_manifest")) cfg.platform_manifest = *p;
  if (auto p = file.get("ta_artifact")) cfg.ta_artifact = *p;
  cfg.max_concurrency = file.get_u64("max_concurrency", cfg.max_concurrency);
  cfg.min_sources = file.get_u64("min_sources", cfg.min_sources);
  cfg.sources = parse_sources(file);
  apply_env_overrides(cfg);
  validate(cfg);
  return cfg;
}

ServerConfig load_server_config(const std::filesystem::path& path) {
  auto file = KeyValueFile::load(path);
  auto cfg = parse_server_config(file);
  // Relative paths in the file are relative to the file itself.
  auto base = path.parent_path();
  auto rebase = [&](std::filesystem::path& p) {
    if (p.is_relative() && !base.empty()) p = base / p;
  };
  rebase(cfg.key_file);
  if (cfg.public_key_out) rebase(*cfg.public_key_out);
  if (cfg.platform_manifest) rebase(*cfg.platform_manifest);
  if (cfg.ta_artifact) rebase(*cfg.ta_artifact);
  for (auto& s : cfg.sources) {
    if (!s.replay_file.empty()) rebase(s.replay_file);
  }
  return cfg;
}

void apply_env_overrides(ServerConfig& config) {
  if (const char* listen = std::getenv("EAAS_LISTEN"); listen && *listen) parse_listen(listen, config);
  if (const char* max = std::getenv("EAAS_MAX_DELTA_S"); max && *max) {
    std::string s(max);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0 || v > 0xffffffffull) {
      throw Error(Errc::ConfigError, "EAAS_MAX_DELTA_S must be a positive 32-bit integer");
    }
    config.max_delta_s = static_cast<std::uint32_t>(v);
  }
}

}  // namespace server
}  // namespace eaas
