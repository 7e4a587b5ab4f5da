#include "eaas/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "eaas/client.hpp"
#include "eaas/sources.hpp"

namespace eaas::sim {

namespace {

constexpr std::string_view kActionNames[] = {
    "drop",        "tamper-pk",         "tamper-delta-s", "tamper-sig1", "tamper-hint", "tamper-wrapped-key",
    "tamper-nonce", "tamper-ciphertext", "tamper-sig2",    "replay-response", "delay",
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  Bytes material;
  put_u64be(material, seed);
  append(material, as_bytes(label));
  return load_u64be(view(sha256(material)));
}

void flip_random_bit(std::span<std::uint8_t> data, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pos(0, data.size() * 8 - 1);
  const auto bit = pos(rng);
  data[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
}

bool is_request_field(ActionKind k) {
  return k == ActionKind::TamperPk || k == ActionKind::TamperDeltaS || k == ActionKind::TamperSig1;
}

bool is_envelope_field(ActionKind k) {
  return k == ActionKind::TamperWrappedKey || k == ActionKind::TamperNonce || k == ActionKind::TamperCiphertext ||
         k == ActionKind::TamperSig2;
}

Bytes mutate_envelope(ByteView encoded, ActionKind kind, std::mt19937_64& rng) {
  auto env = wire::decode_envelope(encoded);
  switch (kind) {
    case ActionKind::TamperWrappedKey: flip_random_bit(env.wrapped_key, rng); break;
    case ActionKind::TamperNonce: flip_random_bit(env.nonce, rng); break;
    case ActionKind::TamperCiphertext: flip_random_bit(env.ciphertext, rng); break;
    case ActionKind::TamperSig2:
      if (env.sigma2) flip_random_bit(*env.sigma2, rng);
      break;
    default: break;
  }
  return wire::encode_envelope(env);
}

std::string fixed(double v, int digits = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Event {
  std::uint64_t time;
  int kind;  // 0 = flood, 1 = honest; flood first at equal times
  std::uint32_t seq;
  bool operator<(const Event& o) const { return std::tie(time, kind, seq) < std::tie(o.time, o.kind, o.seq); }
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& config, const std::vector<AdversaryAction>& actions, std::uint64_t seed)
      : config_(config),
        seed_(seed),
        clock_(config.start_ms),
        rng_(derive_seed(seed, "channel")),
        log_([](LogLevel, std::string_view) {}),
        server_key_(simulation_key(seed, "tes").public_key()) {
    ta::TaConfig ta_config;
    ta_config.max_delta_s = config.max_delta_s;
    ta_config.harvest_deadline = std::chrono::milliseconds(config.harvest_deadline_ms);
    ta_config.sm_measurement = sha256(as_bytes("eaas-sim platform manifest"));
    ta_config.ta_measurement = sha256(as_bytes("eaas-sim trusted application"));

    std::vector<ta::SourceBinding> bindings;
    auto specs = config.sources;
    if (specs.empty()) {
      for (int i = 0; i < 2; ++i) {
        pool::SourceSpec s;
        s.descriptor = {"sensor-" + std::to_string(i), 1.0, 1 << 20};
        s.kind = pool::SourceKind::SimulatedSensor;
        specs.push_back(s);
      }
    }
    for (auto& s : specs) {
      if (s.kind == pool::SourceKind::SimulatedSensor) s.seed = derive_seed(seed ^ s.seed, s.descriptor.source_id);
      bindings.push_back({s.descriptor, pool::make_supplier(s)});
    }
    core_ = std::make_unique<ta::TrustedCore>(ta_config, simulation_key(seed, "tes"), std::move(bindings), clock_,
                                              std::make_unique<SeededRandom>(derive_seed(seed, "ta")));
    service_ = std::make_unique<server::TesService>(*core_, config.throttle, clock_, log_);

    for (std::uint32_t c = 0; c < config.clients; ++c) {
      clients_.push_back(simulation_key(seed, "client-" + std::to_string(c)));
    }

    // Honest trace: indices follow (time, client) order.
    std::vector<std::pair<std::uint64_t, std::uint32_t>> honest;
    for (std::uint32_t c = 0; c < config.clients; ++c) {
      for (std::uint32_t k = 0; k < config.requests_per_client; ++k) {
        honest.emplace_back(config.start_ms + c * config.stagger_ms + k * config.interval_ms, c);
      }
    }
    std::stable_sort(honest.begin(), honest.end());
    for (std::uint32_t i = 0; i < honest.size(); ++i) {
      trace_client_.push_back(honest[i].second);
      events_.push_back({honest[i].first, 1, i});
    }
    if (config.flood_rate > 0 && config.flood_duration_ms > 0) {
      const auto count = static_cast<std::uint64_t>(
          std::floor(config.flood_rate * static_cast<double>(config.flood_duration_ms) / 1000.0));
      for (std::uint64_t i = 0; i < count; ++i) {
        const auto offset = static_cast<std::uint64_t>(std::floor(static_cast<double>(i) * 1000.0 / config.flood_rate));
        events_.push_back({config.start_ms + offset, 0, static_cast<std::uint32_t>(i)});
      }
    }
    std::sort(events_.begin(), events_.end());

    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto& a = actions[i];
      if (a.target >= trace_client_.size()) {
        throw Error(Errc::ConfigError, "action " + std::to_string(i) + " targets request " +
                                           std::to_string(a.target) + " outside the trace");
      }
      if (a.direction == Direction::Request &&
          (a.kind == ActionKind::TamperSig2 || a.kind == ActionKind::ReplayResponse)) {
        throw Error(Errc::ConfigError, "action " + std::to_string(i) + " only applies to responses");
      }
      if (a.kind == ActionKind::ReplayResponse) {
        bool earlier = false;
        for (std::uint32_t j = 0; j < a.target; ++j) earlier |= trace_client_[j] == trace_client_[a.target];
        if (!earlier) throw Error(Errc::ConfigError, "replay target has no earlier response from the same client");
      }
      actions_by_target_[a.target].push_back(i);
    }
    actions_ = actions;
    report_.seed = seed;
    report_.effects.resize(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) report_.effects[i].action = actions[i];
  }

  ScenarioReport run() {
    report_.pool_credit_floor_bits = service_->pool_status().credited_bits;
    for (const auto& ev : events_) {
      if (clock_.now_ms() < ev.time) clock_.set(ev.time);
      if (ev.kind == 0) {
        flood_once();
      } else {
        report_.outcomes.push_back(honest_request(ev.seq));
      }
      report_.pool_credit_floor_bits =
          std::min(report_.pool_credit_floor_bits, service_->pool_status().credited_bits);
    }
    report_.counters = service_->counters();
    if (config_.stats_bytes > 0) collect_stats();
    report_.pool_credit_consumed_bits = service_->pool_status().total_extracted_bytes * 8;
    return std::move(report_);
  }

 private:
  void flood_once() {
    if (flood_body_.empty()) {
      const auto& key = simulation_key(seed_, "attacker");
      client::ClientIdentity attacker{key, server_key_, {}};
      flood_body_ = client::build_request(attacker, config_.flood_delta_s, clock_, rng_, config_.max_delta_s).body();
    }
    ++report_.flood_requests;
    auto reply = service_->route("POST", server::kEntropyPath, flood_body_);
    if (reply.status != 429) ++report_.flood_granted;
    if (reply.status == 200) ++report_.flood_served;
  }

  client::PreparedRequest prepare(std::uint32_t client, const AdversaryAction* action, std::mt19937_64& mrng) {
    const auto& key = clients_[client];
    if (!action || !is_request_field(action->kind)) {
      client::ClientIdentity id{key, server_key_, {}};
      return client::build_request(id, config_.delta_s, clock_, rng_, config_.max_delta_s);
    }
    // White-box: mutate the request before it is encrypted.
    client::PreparedRequest p;
    p.t1 = clock_.now_ms();
    p.delta_s = config_.delta_s;
    auto req = client::make_signed_request(key, config_.delta_s, rng_);
    switch (action->kind) {
      case ActionKind::TamperPk: flip_random_bit(req.client_pub_key, mrng); break;
      case ActionKind::TamperDeltaS: {
        std::uniform_int_distribution<std::uint32_t> dist(1, config_.max_delta_s);
        std::uint32_t v = req.delta_s;
        while (v == req.delta_s) v = dist(mrng);
        req.delta_s = v;
        break;
      }
      case ActionKind::TamperSig1: flip_random_bit(req.sigma1, mrng); break;
      default: break;
    }
    // A consistent attacker also rewrites the cleartext hint.
    p.hint = wire::fingerprint(req.client_pub_key);
    p.envelope = client::seal_request(wire::encode_request(req), server_key_, rng_);
    return p;
  }

  RequestOutcome honest_request(std::uint32_t index) {
    const std::uint32_t client = trace_client_[index];
    RequestOutcome out{index, client, std::nullopt, 0};
    const AdversaryAction* action = nullptr;
    std::size_t action_index = 0;
    if (auto it = actions_by_target_.find(index); it != actions_by_target_.end()) {
      action_index = it->second.front();
      action = &actions_[action_index];
    }
    const std::uint64_t param = action && action->parameter ? *action->parameter : 0;
    std::mt19937_64 mrng(derive_seed(seed_ ^ param, "mutation-" + std::to_string(index)));

    const std::uint32_t attempts = std::max<std::uint32_t>(1, config_.max_attempts);
    for (std::uint32_t attempt = 1; attempt <= attempts; ++attempt) {
      out.attempts = attempt;
      const AdversaryAction* act = attempt == 1 ? action : nullptr;
      auto err = attempt_once(client, act, mrng);
      if (act) report_.effects[action_index].observed = err;
      out.error = err;
      if (!err || attempt == attempts) break;
      if (*err == Errc::Throttled) {
        clock_.advance(1000 * last_retry_after_);
      } else if (*err == Errc::Transport) {
        clock_.advance(1000ull * attempt);
      } else {
        break;
      }
    }
    return out;
  }

  std::optional<Errc> attempt_once(std::uint32_t client, const AdversaryAction* act, std::mt19937_64& mrng) {
    auto prepared = prepare(client, act, mrng);
    const auto kind = act ? std::optional(act->kind) : std::nullopt;
    const bool on_request = act && act->direction == Direction::Request;
    const bool on_response = act && act->direction == Direction::Response;

    if (on_request && kind == ActionKind::Drop) return Errc::Transport;
    if (on_request && kind && is_envelope_field(*kind)) prepared.envelope = mutate_envelope(prepared.envelope, *kind, mrng);
    if (kind == ActionKind::TamperHint) flip_random_bit(prepared.hint.id, mrng);

    clock_.advance(config_.latency_ms);
    auto reply = service_->route("POST", server::kEntropyPath, prepared.body());
    if (kind == ActionKind::Delay) clock_.advance(act->parameter.value_or(0));
    clock_.advance(config_.latency_ms);

    if (reply.status == 429) {
      last_retry_after_ = 1;
      if (auto it = reply.headers.find("Retry-After"); it != reply.headers.end()) {
        last_retry_after_ = std::stoull(it->second);
      }
      return Errc::Throttled;
    }
    if (reply.status != 200) return client::errc_for_server_code(reply.error_code());

    Bytes body = reply.body;
    if (on_response && kind == ActionKind::Drop) {
      last_response_[client] = reply.body;
      return Errc::Transport;
    }
    if (kind == ActionKind::ReplayResponse) body = last_response_.at(client);
    if (on_response && kind && is_envelope_field(*kind)) body = mutate_envelope(body, *kind, mrng);
    last_response_[client] = reply.body;

    try {
      client::verify_response(body, prepared.t1, prepared.delta_s, server_key_, clients_[client],
                                             {clock_.now_ms(), 30'000});
      return std::nullopt;
    } catch (const Error& e) {
      return e.code();
    }
  }

  void collect_stats() {
    client::ClientIdentity id{simulation_key(seed_, "stats"), server_key_, {}};
    Bytes delivered;
    delivered.reserve(config_.stats_bytes);
    const std::uint32_t chunk = config_.max_delta_s;
    while (delivered.size() < config_.stats_bytes) {
      clock_.advance(1000);
      auto prepared = client::build_request(id, chunk, clock_, rng_, config_.max_delta_s);
      clock_.advance(config_.latency_ms);
      auto reply = service_->route("POST", server::kEntropyPath, prepared.body());
      clock_.advance(config_.latency_ms);
      if (reply.status != 200) throw Error(client::errc_for_server_code(reply.error_code()), "stats collection");
      auto s = client::verify_response(reply.body, prepared.t1, chunk, server_key_, id.keypair, {clock_.now_ms(), 30'000});
      append(delivered, s);
    }
    delivered.resize(config_.stats_bytes);
    report_.stats = stats::stats_suite(delivered);
  }

  ScenarioConfig config_;
  std::uint64_t seed_;
  ManualClock clock_;
  SeededRandom rng_;
  Logger log_;
  crypto::PublicKey server_key_;
  std::unique_ptr<ta::TrustedCore> core_;
  std::unique_ptr<server::TesService> service_;
  std::vector<crypto::KeyPair> clients_;
  std::vector<std::uint32_t> trace_client_;
  std::vector<Event> events_;
  std::vector<AdversaryAction> actions_;
  std::map<std::uint32_t, std::vector<std::size_t>> actions_by_target_;
  std::map<std::uint32_t, Bytes> last_response_;
  std::uint64_t last_retry_after_ = 1;
  Bytes flood_body_;
  ScenarioReport report_;
};

}  // namespace

std::string_view to_string(ActionKind k) { return kActionNames[static_cast<std::size_t>(k)]; }

ActionKind parse_action_kind(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kActionNames); ++i) {
    if (kActionNames[i] == name) return static_cast<ActionKind>(i);
  }
  throw Error(Errc::ConfigError, "unknown action kind '" + std::string(name) + "'");
}

std::string_view to_string(Direction d) { return d == Direction::Request ? "request" : "response"; }

ScenarioConfig parse_scenario(const KeyValueFile& file) {
  ScenarioConfig c;
  auto u32 = [&](const std::string& key, std::uint32_t fallback) {
    auto v = file.get_u64(key, fallback);
    if (v > 0xffffffffull) throw Error(Errc::ConfigError, key + " too large");
    return static_cast<std::uint32_t>(v);
  };
  c.clients = u32("clients", c.clients);
  c.requests_per_client = u32("requests_per_client", c.requests_per_client);
  c.delta_s = u32("delta_s", c.delta_s);
  c.start_ms = file.get_u64("start_ms", c.start_ms);
  c.interval_ms = file.get_u64("interval_ms", c.interval_ms);
  c.stagger_ms = file.get_u64("stagger_ms", c.stagger_ms);
  c.latency_ms = file.get_u64("latency_ms", c.latency_ms);
  c.max_attempts = u32("max_attempts", c.max_attempts);
  c.max_delta_s = u32("max_delta_s", c.max_delta_s);
  c.throttle.enabled = file.get_or("throttle", "on") != "off";
  c.throttle.capacity = file.get_double("throttle_capacity", c.throttle.capacity);
  c.throttle.refill_per_sec = file.get_double("throttle_rate", c.throttle.refill_per_sec);
  c.harvest_deadline_ms = file.get_u64("harvest_deadline_ms", c.harvest_deadline_ms);
  c.flood_rate = file.get_double("flood_rate", c.flood_rate);
  c.flood_duration_ms = file.get_u64("flood_duration_ms", c.flood_duration_ms);
  c.flood_delta_s = u32("flood_delta_s", c.flood_delta_s);
  c.stats_bytes = file.get_u64("stats_bytes", c.stats_bytes);
  c.sources = server::parse_sources(file);

  if (c.clients == 0 && c.requests_per_client > 0) throw Error(Errc::ConfigError, "clients must be positive");
  if (c.max_delta_s == 0) throw Error(Errc::ConfigError, "max_delta_s must be positive");
  if (c.delta_s == 0 || c.delta_s > c.max_delta_s) throw Error(Errc::ConfigError, "delta_s out of range");
  if (c.flood_delta_s == 0 || c.flood_delta_s > c.max_delta_s) {
    throw Error(Errc::ConfigError, "flood_delta_s out of range");
  }
  if (c.flood_rate < 0) throw Error(Errc::ConfigError, "flood_rate must be non-negative");
  if (c.stats_bytes != 0 && c.stats_bytes < stats::kMinInput) {
    throw Error(Errc::ConfigError, "stats_bytes must be 0 or at least " + std::to_string(stats::kMinInput));
  }
  return c;
}

std::vector<AdversaryAction> parse_actions(const KeyValueFile& file) {
  std::vector<AdversaryAction> out;
  for (const auto& id : file.groups("action")) {
    const std::string p = "action." + id + ".";
    AdversaryAction a;
    auto kind = file.get(p + "kind");
    if (!kind) throw Error(Errc::ConfigError, p + "kind is required");
    a.kind = parse_action_kind(*kind);
    auto target = file.get_u64(p + "target", 0);
    if (target > 0xffffffffull) throw Error(Errc::ConfigError, p + "target too large");
    a.target = static_cast<std::uint32_t>(target);
    auto dir = file.get_or(p + "direction", "response");
    if (dir == "request") {
      a.direction = Direction::Request;
    } else if (dir == "response") {
      a.direction = Direction::Response;
    } else {
      throw Error(Errc::ConfigError, p + "direction must be request or response");
    }
    if (file.get(p + "parameter")) a.parameter = file.get_u64(p + "parameter", 0);
    out.push_back(a);
  }
  return out;
}

std::size_t ScenarioReport::successes() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const RequestOutcome& o) { return !o.error; }));
}

double ScenarioReport::honest_success_rate() const {
  if (outcomes.empty()) return 1.0;
  return static_cast<double>(successes()) / static_cast<double>(outcomes.size());
}

std::size_t ScenarioReport::count(Errc e) const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [e](const RequestOutcome& o) { return o.error == e; }));
}

std::string ScenarioReport::to_text() const {
  std::ostringstream out;
  out << "seed " << seed << '\n';
  for (const auto& o : outcomes) {
    out << "request " << o.index << " client " << o.client << " outcome "
        << (o.error ? to_string(*o.error) : std::string_view("success")) << " attempts " << o.attempts << '\n';
  }
  for (const auto& e : effects) {
    out << "action " << to_string(e.action.kind) << " target " << e.action.target << " direction "
        << to_string(e.action.direction) << " observed "
        << (e.observed ? to_string(*e.observed) : std::string_view("success")) << '\n';
  }
  for (const auto& t : stats) {
    out << "stat " << t.name << " statistic " << fixed(t.statistic) << ' ' << (t.pass ? "pass" : "fail") << '\n';
  }
  out << "[summary]\n";
  out << "requests " << outcomes.size() << '\n';
  out << "successes " << successes() << '\n';
  out << "honest_success_rate " << fixed(honest_success_rate(), 4) << '\n';
  out << "throttled " << count(Errc::Throttled) << '\n';
  out << "entropy_depleted " << count(Errc::EntropyDepleted) << '\n';
  out << "server_allowed " << counters.allowed << '\n';
  out << "server_throttled " << counters.throttled << '\n';
  out << "server_depleted " << counters.depleted << '\n';
  out << "server_rejected " << counters.rejected << '\n';
  out << "server_served " << counters.served << '\n';
  out << "flood_requests " << flood_requests << '\n';
  out << "flood_granted " << flood_granted << '\n';
  out << "flood_served " << flood_served << '\n';
  out << "pool_credit_consumed_bits " << pool_credit_consumed_bits << '\n';
  out << "pool_credit_floor_bits " << pool_credit_floor_bits << '\n';
  if (!stats.empty()) out << "stats " << (stats::all_pass(stats) ? "pass" : "fail") << '\n';
  out << "[/summary]\n";
  return out.str();
}

ScenarioReport run_scenario(const ScenarioConfig& config, const std::vector<AdversaryAction>& actions,
                            std::uint64_t seed) {
  return Simulation(config, actions, seed).run();
}

ScenarioReport run_fleet(std::uint32_t n_clients, std::uint32_t requests_per_client, std::uint32_t delta_s,
                         std::uint64_t seed) {
  ScenarioConfig c;
  c.clients = n_clients;
  c.requests_per_client = requests_per_client;
  c.delta_s = delta_s;
  return run_scenario(c, {}, seed);
}

ScenarioReport run_adversary(const ScenarioConfig& scenario, const std::vector<AdversaryAction>& actions,
                             std::uint64_t seed) {
  return run_scenario(scenario, actions, seed);
}

ScenarioReport depletion_scenario(double flood_rate, std::uint64_t duration_ms, std::uint32_t honest_clients,
                                  bool throttle_enabled, std::uint64_t seed) {
  ScenarioConfig c;
  c.clients = honest_clients;
  c.requests_per_client = static_cast<std::uint32_t>(duration_ms / 1000);
  c.delta_s = 32;
  c.start_ms = 1'700'000'000'000;
  c.interval_ms = 1000;
  c.stagger_ms = 1000 / std::max<std::uint32_t>(1, honest_clients);
  c.throttle.enabled = throttle_enabled;
  c.flood_rate = flood_rate;
  c.flood_duration_ms = duration_ms;
  // Small requests always fit the pool, so every grant drains it.
  c.flood_delta_s = 32;
  // Slow sources: 4 KiB/s in total, below the flood's demand.
  for (int i = 0; i < 2; ++i) {
    pool::SourceSpec s;
    s.descriptor = {"sensor-" + std::to_string(i), 1.0, 2048};
    s.kind = pool::SourceKind::SimulatedSensor;
    s.seed = static_cast<std::uint64_t>(i);
    c.sources.push_back(s);
  }
  return run_scenario(c, {}, seed);
}

std::optional<Errc> designated_error(ActionKind kind, Direction direction) {
  switch (kind) {
    case ActionKind::Drop: return Errc::Transport;
    case ActionKind::TamperPk:
    case ActionKind::TamperDeltaS:
    case ActionKind::TamperSig1: return Errc::BadSignature;
    case ActionKind::TamperHint: return Errc::HintMismatch;
    case ActionKind::TamperWrappedKey:
    case ActionKind::TamperNonce:
    case ActionKind::TamperCiphertext:
      return direction == Direction::Request ? Errc::DecryptFailure : Errc::BadServerSignature;
    case ActionKind::TamperSig2: return Errc::BadServerSignature;
    case ActionKind::ReplayResponse: return Errc::Stale;
    case ActionKind::Delay: return std::nullopt;
  }
  return std::nullopt;
}

const crypto::KeyPair& simulation_key(std::uint64_t seed, const std::string& label) {
  static std::mutex mutex;
  static std::map<std::pair<std::uint64_t, std::string>, std::unique_ptr<crypto::KeyPair>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{seed, label}];
  if (!slot) {
    SeededRandom rng(derive_seed(seed, "key-" + label));
    slot = std::make_unique<crypto::KeyPair>(crypto::generate_keypair(rng));
  }
  return *slot;
}

}  // namespace eaas::sim
