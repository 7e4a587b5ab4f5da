#pragma once

// Entropy pool: pluggable sources, per-block health testing, conservative
// min-entropy crediting and SHA-256 extraction with a backtracking ratchet.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eaas/bytes.hpp"
#include "eaas/clock.hpp"

namespace eaas::pool {

enum class SourceHealth { Healthy, Degraded, Disabled };

std::string_view to_string(SourceHealth h);

struct SourceDescriptor {
  std::string source_id;
  double declared_density = 1.0;  // min-entropy bits per output bit, (0, 1]
  double max_rate = 0;            // bytes per second, > 0
};

// Pull-based generator: fills the span or throws (a throwing source is disabled).
using ByteSupplier = std::function<void(std::span<std::uint8_t>)>;

struct HealthThresholds {
  double monobit_sigmas = 4.0;
  std::size_t max_repeat = 20;
  std::size_t min_block = 64;
};

enum class HealthFailure { None, Monobit, Repetition };

struct HealthResult {
  bool pass = true;
  HealthFailure failure = HealthFailure::None;
  std::size_t ones = 0;
  std::size_t longest_run = 0;
};

// Throws Error{BlockTooShort} below thresholds.min_block.
HealthResult health_test(ByteView block, const HealthThresholds& thresholds = {});

struct PoolState {
  Bytes buffered;
  std::uint64_t credited_bits = 0;
  std::map<std::string, SourceHealth> per_source_health;
  // Lifetime accounting for the conservation invariant.
  std::uint64_t total_credited_bits = 0;
  std::uint64_t total_extracted_bytes = 0;
};

// Bits a block of `bytes` earns from a source of `density`: floor(8 * bytes * density).
std::uint64_t credit_for(std::size_t bytes, double density);

// Output is SHA-256(counter_be32 || buffered) for counter = 0, 1, ... truncated
// to n_bytes. Consumes 8 * n_bytes of credit and replaces the buffer with a
// ratcheted digest stream. Throws Error{InsufficientCredit}.
Bytes extract(PoolState& state, std::uint32_t n_bytes);

struct PoolOptions {
  std::size_t block_size = 64;
  HealthThresholds health;
  // Consecutive failures while Degraded before a source is Disabled.
  std::size_t disable_after = 8;
  // Consecutive passes while Degraded before a source is Healthy again.
  std::size_t recover_after = 4;
  // Minimum number of non-disabled sources required to harvest.
  std::size_t min_sources = 1;
};

struct SourceInfo {
  SourceDescriptor descriptor;
  SourceHealth health = SourceHealth::Healthy;
  std::uint64_t blocks_pulled = 0;
  std::uint64_t blocks_failed = 0;
  std::uint64_t credited_bits = 0;
  std::optional<std::uint64_t> degraded_at_block;  // 1-based block index of first failure
};

// Public view of the pool; never includes buffer bytes.
struct PoolStatus {
  std::uint64_t credited_bits = 0;
  std::size_t buffered_bytes = 0;
  std::uint64_t total_credited_bits = 0;
  std::uint64_t total_extracted_bytes = 0;
  std::vector<SourceInfo> sources;
};

using SourceHandle = std::size_t;

class EntropyPool {
 public:
  explicit EntropyPool(Clock& clock, PoolOptions options = {});

  EntropyPool(const EntropyPool&) = delete;
  EntropyPool& operator=(const EntropyPool&) = delete;

  // Throws Error{DuplicateSourceId}, or Error{ConfigError} for an invalid descriptor.
  SourceHandle register_source(SourceDescriptor descriptor, ByteSupplier supplier);

  // Pulls blocks round-robin from every non-disabled source until the pool
  // holds at least `needed_bits` of credit. Throws Error{NoSources} or, once
  // `deadline` has elapsed without enough credit, Error{EntropyDepleted}.
  PoolStatus harvest(std::uint64_t needed_bits, std::chrono::milliseconds deadline);

  Bytes extract(std::uint32_t n_bytes);

  // harvest(8 * n_bytes) followed by extract(n_bytes) under one lock.
  Bytes draw(std::uint32_t n_bytes, std::chrono::milliseconds deadline);

  PoolStatus status() const;

 private:
  struct Source {
    SourceDescriptor descriptor;
    ByteSupplier supplier;
    SourceInfo info;
    double allowance = 0;  // bytes available under max_rate
    std::uint64_t last_refill_ms = 0;
    std::size_t consecutive_failures = 0;
    std::size_t consecutive_passes = 0;
  };

  void harvest_locked(std::uint64_t needed_bits, std::chrono::milliseconds deadline);
  bool pull_block(Source& source);
  void refill(Source& source, std::uint64_t now);
  void record(Source& source, bool pass);
  std::size_t live_sources() const;
  PoolStatus snapshot_locked() const;

  Clock& clock_;
  PoolOptions options_;
  mutable std::mutex mutex_;
  std::vector<Source> sources_;
  PoolState state_;
  std::size_t cursor_ = 0;
};

}  // namespace eaas::pool
