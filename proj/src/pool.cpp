#include "eaas/pool.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "eaas/error.hpp"
#include "eaas/hash.hpp"

namespace eaas::pool {

namespace {
constexpr std::string_view kRatchet = "EAAS-POOL-RATCHET";
constexpr std::size_t kDigest = 32;

// SHA-256(prefix || counter_be32 || material) for counter = 0.. until `length` bytes.
Bytes digest_stream(std::string_view prefix, ByteView material, std::size_t length) {
  Bytes out;
  out.reserve(length + kDigest);
  for (std::uint32_t counter = 0; out.size() < length; ++counter) {
    Bytes c;
    put_u32be(c, counter);
    auto block = sha256({as_bytes(prefix), ByteView(c), material});
    append(out, view(block));
  }
  out.resize(length);
  return out;
}
}  // namespace

std::string_view to_string(SourceHealth h) {
  switch (h) {
    case SourceHealth::Healthy: return "healthy";
    case SourceHealth::Degraded: return "degraded";
    case SourceHealth::Disabled: return "disabled";
  }
  return "?";
}

HealthResult health_test(ByteView block, const HealthThresholds& thresholds) {
  if (block.size() < thresholds.min_block) throw Error(Errc::BlockTooShort, std::to_string(block.size()));
  HealthResult r;
  std::size_t run = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    r.ones += static_cast<std::size_t>(std::popcount(block[i]));
    run = (i > 0 && block[i] == block[i - 1]) ? run + 1 : 1;
    r.longest_run = std::max(r.longest_run, run);
  }
  const double n = static_cast<double>(block.size());
  const double deviation = std::abs(static_cast<double>(r.ones) - 4.0 * n);
  // A stuck source trips both rules; it is reported as a repetition.
  if (r.longest_run > thresholds.max_repeat) {
    r.pass = false;
    r.failure = HealthFailure::Repetition;
  } else if (deviation > thresholds.monobit_sigmas * std::sqrt(2.0 * n)) {
    r.pass = false;
    r.failure = HealthFailure::Monobit;
  }
  return r;
}

std::uint64_t credit_for(std::size_t bytes, double density) {
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(bytes) * 8.0 * density));
}

Bytes extract(PoolState& state, std::uint32_t n_bytes) {
  if (n_bytes == 0) return {};
  const std::uint64_t cost = 8ull * n_bytes;
  if (state.credited_bits < cost) {
    throw Error(Errc::InsufficientCredit,
                "need " + std::to_string(cost) + " bits, have " + std::to_string(state.credited_bits));
  }
  Bytes out = digest_stream({}, state.buffered, n_bytes);

  const std::uint64_t remaining = state.credited_bits - cost;
  const std::size_t next_len = std::max<std::size_t>(kDigest, static_cast<std::size_t>((remaining + 7) / 8));
  Bytes next = digest_stream(kRatchet, state.buffered, next_len);
  std::fill(state.buffered.begin(), state.buffered.end(), 0);
  state.buffered = std::move(next);
  state.credited_bits = remaining;
  state.total_extracted_bytes += n_bytes;
  return out;
}

EntropyPool::EntropyPool(Clock& clock, PoolOptions options) : clock_(clock), options_(options) {
  if (options_.block_size < options_.health.min_block) {
    throw Error(Errc::ConfigError, "block size below health-test minimum");
  }
}

SourceHandle EntropyPool::register_source(SourceDescriptor descriptor, ByteSupplier supplier) {
  if (!(descriptor.declared_density > 0.0 && descriptor.declared_density <= 1.0)) {
    throw Error(Errc::ConfigError, "density must be in (0, 1]");
  }
  if (!(descriptor.max_rate > 0.0)) throw Error(Errc::ConfigError, "max_rate must be positive");
  if (descriptor.source_id.empty()) throw Error(Errc::ConfigError, "empty source id");
  if (!supplier) throw Error(Errc::ConfigError, "missing supplier");

  std::lock_guard lock(mutex_);
  for (const auto& s : sources_) {
    if (s.descriptor.source_id == descriptor.source_id) throw Error(Errc::DuplicateSourceId, descriptor.source_id);
  }
  Source s;
  s.info.descriptor = descriptor;
  s.descriptor = std::move(descriptor);
  s.supplier = std::move(supplier);
  s.allowance = std::max(s.descriptor.max_rate, static_cast<double>(options_.block_size));
  s.last_refill_ms = clock_.now_ms();
  state_.per_source_health[s.descriptor.source_id] = SourceHealth::Healthy;
  sources_.push_back(std::move(s));
  return sources_.size() - 1;
}

void EntropyPool::refill(Source& source, std::uint64_t now) {
  if (now <= source.last_refill_ms) return;
  const double capacity = std::max(source.descriptor.max_rate, static_cast<double>(options_.block_size));
  const double added = source.descriptor.max_rate * static_cast<double>(now - source.last_refill_ms) / 1000.0;
  source.allowance = std::min(capacity, source.allowance + added);
  source.last_refill_ms = now;
}

void EntropyPool::record(Source& source, bool pass) {
  auto& info = source.info;
  if (pass) {
    source.consecutive_failures = 0;
    ++source.consecutive_passes;
    if (info.health == SourceHealth::Degraded && source.consecutive_passes >= options_.recover_after) {
      info.health = SourceHealth::Healthy;
    }
  } else {
    ++info.blocks_failed;
    source.consecutive_passes = 0;
    ++source.consecutive_failures;
    if (!info.degraded_at_block) info.degraded_at_block = info.blocks_pulled;
    if (info.health == SourceHealth::Healthy) {
      info.health = SourceHealth::Degraded;
    } else if (info.health == SourceHealth::Degraded && source.consecutive_failures >= options_.disable_after) {
      info.health = SourceHealth::Disabled;
    }
  }
  state_.per_source_health[source.descriptor.source_id] = info.health;
}

// Returns true if a block was pulled (whether or not it earned credit).
bool EntropyPool::pull_block(Source& source) {
  refill(source, clock_.now_ms());
  const auto block_size = static_cast<double>(options_.block_size);
  if (source.allowance < block_size) return false;
  source.allowance -= block_size;

  Bytes block(options_.block_size);
  try {
    source.supplier(block);
  } catch (const std::exception&) {
    source.info.health = SourceHealth::Disabled;
    state_.per_source_health[source.descriptor.source_id] = SourceHealth::Disabled;
    return false;
  }
  ++source.info.blocks_pulled;

  const bool was_healthy = source.info.health == SourceHealth::Healthy;
  const bool pass = health_test(block, options_.health).pass;
  record(source, pass);
  if (pass && was_healthy) {
    const auto credit = credit_for(block.size(), source.descriptor.declared_density);
    append(state_.buffered, block);
    state_.credited_bits += credit;
    state_.total_credited_bits += credit;
    source.info.credited_bits += credit;
  }
  std::fill(block.begin(), block.end(), 0);
  return true;
}

std::size_t EntropyPool::live_sources() const {
  return static_cast<std::size_t>(std::count_if(sources_.begin(), sources_.end(), [](const Source& s) {
    return s.info.health != SourceHealth::Disabled;
  }));
}

void EntropyPool::harvest_locked(std::uint64_t needed_bits, std::chrono::milliseconds deadline) {
  const std::uint64_t start = clock_.now_ms();
  const auto budget = static_cast<std::uint64_t>(std::max<std::int64_t>(0, deadline.count()));
  while (state_.credited_bits < needed_bits) {
    if (sources_.empty() || live_sources() < std::max<std::size_t>(1, options_.min_sources)) {
      throw Error(Errc::NoSources);
    }
    bool progress = false;
    for (std::size_t i = 0; i < sources_.size() && state_.credited_bits < needed_bits; ++i) {
      auto& source = sources_[cursor_];
      cursor_ = (cursor_ + 1) % sources_.size();
      if (source.info.health == SourceHealth::Disabled) continue;
      progress |= pull_block(source);
    }
    if (progress || state_.credited_bits >= needed_bits) continue;

    const std::uint64_t elapsed = clock_.now_ms() - start;
    if (elapsed >= budget) throw Error(Errc::EntropyDepleted);
    // Sleep until the earliest source can supply another block.
    double wait_ms = std::numeric_limits<double>::max();
    for (const auto& s : sources_) {
      if (s.info.health == SourceHealth::Disabled) continue;
      const double missing = static_cast<double>(options_.block_size) - s.allowance;
      wait_ms = std::min(wait_ms, std::max(1.0, std::ceil(missing * 1000.0 / s.descriptor.max_rate)));
    }
    if (wait_ms == std::numeric_limits<double>::max()) throw Error(Errc::NoSources);
    clock_.sleep_for(std::min<std::uint64_t>(static_cast<std::uint64_t>(wait_ms), budget - elapsed));
  }
}

PoolStatus EntropyPool::harvest(std::uint64_t needed_bits, std::chrono::milliseconds deadline) {
  std::lock_guard lock(mutex_);
  harvest_locked(needed_bits, deadline);
  return snapshot_locked();
}

Bytes EntropyPool::extract(std::uint32_t n_bytes) {
  std::lock_guard lock(mutex_);
  return pool::extract(state_, n_bytes);
}

Bytes EntropyPool::draw(std::uint32_t n_bytes, std::chrono::milliseconds deadline) {
  std::lock_guard lock(mutex_);
  harvest_locked(8ull * n_bytes, deadline);
  return pool::extract(state_, n_bytes);
}

PoolStatus EntropyPool::status() const {
  std::lock_guard lock(mutex_);
  return snapshot_locked();
}

PoolStatus EntropyPool::snapshot_locked() const {
  PoolStatus st;
  st.credited_bits = state_.credited_bits;
  st.buffered_bytes = state_.buffered.size();
  st.total_credited_bits = state_.total_credited_bits;
  st.total_extracted_bytes = state_.total_extracted_bytes;
  for (const auto& s : sources_) st.sources.push_back(s.info);
  return st;
}

}  // namespace eaas::pool
