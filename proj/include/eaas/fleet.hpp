#pragma once

// Deterministic fleet simulation: N client identities against an in-process
// TES on simulated time, with an optional message-level adversary on the
// channel and an optional single-fingerprint flood.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eaas/config.hpp"
#include "eaas/error.hpp"
#include "eaas/server.hpp"
#include "eaas/stats.hpp"

namespace eaas::sim {

enum class ActionKind {
  Drop,
  TamperPk,
  TamperDeltaS,
  TamperSig1,
  TamperHint,
  TamperWrappedKey,
  TamperNonce,
  TamperCiphertext,
  TamperSig2,
  ReplayResponse,
  Delay,
};

enum class Direction { Request, Response };

std::string_view to_string(ActionKind k);
ActionKind parse_action_kind(std::string_view name);
std::string_view to_string(Direction d);

struct AdversaryAction {
  ActionKind kind = ActionKind::Drop;
  std::uint32_t target = 0;  // index into the honest request trace
  Direction direction = Direction::Response;
  // Mutation seed (tamper kinds) or delay in ms (Delay).
  std::optional<std::uint64_t> parameter;
};

struct ScenarioConfig {
  std::uint32_t clients = 10;
  std::uint32_t requests_per_client = 3;
  std::uint32_t delta_s = 32;
  std::uint64_t start_ms = 1'700'000'000'000;
  std::uint64_t interval_ms = 1000;  // between one client's requests
  std::uint64_t stagger_ms = 10;     // between clients' first requests
  std::uint64_t latency_ms = 1;      // one-way channel latency
  std::uint32_t max_attempts = 1;
  std::uint32_t max_delta_s = wire::kDefaultMaxDeltaS;
  server::ThrottleConfig throttle;
  std::vector<pool::SourceSpec> sources;  // empty: two simulated sensors
  std::uint64_t harvest_deadline_ms = 0;

  // Single-fingerprint flood replaying one valid request.
  double flood_rate = 0;  // requests per second
  std::uint64_t flood_duration_ms = 0;
  std::uint32_t flood_delta_s = 32;

  // Collect this many bytes of delivered entropy after the run and test them.
  std::size_t stats_bytes = 0;
};

// Reads the flat key = value scenario format (see README).
ScenarioConfig parse_scenario(const KeyValueFile& file);
std::vector<AdversaryAction> parse_actions(const KeyValueFile& file);

struct RequestOutcome {
  std::uint32_t index = 0;
  std::uint32_t client = 0;
  std::optional<Errc> error;  // nullopt on success
  std::uint32_t attempts = 0;
};

struct ActionEffect {
  AdversaryAction action;
  std::optional<Errc> observed;  // error on the attempt the action touched
};

struct ScenarioReport {
  std::uint64_t seed = 0;
  std::vector<RequestOutcome> outcomes;
  std::vector<ActionEffect> effects;
  server::ServiceCounters counters;
  std::uint64_t pool_credit_consumed_bits = 0;
  std::uint64_t pool_credit_floor_bits = 0;
  std::uint64_t flood_requests = 0;
  std::uint64_t flood_granted = 0;  // passed the throttle
  std::uint64_t flood_served = 0;   // received entropy
  std::vector<stats::TestResult> stats;

  std::size_t successes() const;
  double honest_success_rate() const;
  std::size_t count(Errc e) const;
  // Line-oriented text plus a [summary] block. Byte-identical for equal runs.
  std::string to_text() const;
};

ScenarioReport run_scenario(const ScenarioConfig& config, const std::vector<AdversaryAction>& actions,
                            std::uint64_t seed);

ScenarioReport run_fleet(std::uint32_t n_clients, std::uint32_t requests_per_client, std::uint32_t delta_s,
                         std::uint64_t seed);

// Throws Error{ConfigError} if an action targets a request outside the trace.
ScenarioReport run_adversary(const ScenarioConfig& scenario, const std::vector<AdversaryAction>& actions,
                             std::uint64_t seed);

ScenarioReport depletion_scenario(double flood_rate, std::uint64_t duration_ms, std::uint32_t honest_clients,
                                  bool throttle_enabled, std::uint64_t seed);

// The error each adversary action is designed to produce; nullopt for Delay.
std::optional<Errc> designated_error(ActionKind kind, Direction direction);

// Deterministic RSA-3072 keys, memoized per (seed, label) for the process.
const crypto::KeyPair& simulation_key(std::uint64_t seed, const std::string& label);

}  // namespace eaas::sim
