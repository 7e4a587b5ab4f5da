#include "eaas/throttle.hpp"

#include <algorithm>
#include <cmath>

#include "eaas/error.hpp"

namespace eaas::server {

ThrottleTable::ThrottleTable(ThrottleConfig config) : config_(config) {
  if (config_.enabled && (!(config_.capacity >= 1.0) || !(config_.refill_per_sec > 0.0))) {
    throw Error(Errc::ConfigError, "throttle needs capacity >= 1 and a positive refill rate");
  }
  capacity_ = static_cast<std::int64_t>(std::llround(config_.capacity * kUnit));
  rate_per_ms_ = static_cast<std::int64_t>(std::llround(config_.refill_per_sec * 1000.0));
  if (config_.enabled && rate_per_ms_ <= 0) throw Error(Errc::ConfigError, "refill rate below resolution");
}

std::int64_t ThrottleTable::refilled(const Bucket& b, std::uint64_t now_ms) const {
  if (now_ms <= b.last_refill_ms) return b.tokens;
  const auto elapsed = static_cast<std::int64_t>(now_ms - b.last_refill_ms);
  // Saturate before multiplying: anything beyond a full refill is irrelevant.
  const std::int64_t full_after = (capacity_ - b.tokens + rate_per_ms_ - 1) / rate_per_ms_;
  if (elapsed >= full_after) return capacity_;
  return std::min(capacity_, b.tokens + rate_per_ms_ * elapsed);
}

ThrottleDecision ThrottleTable::check(const wire::Fingerprint& fp, std::uint64_t now_ms) {
  if (!config_.enabled) return {true, 0};
  std::lock_guard lock(mutex_);
  auto it = buckets_.find(fp);
  if (it == buckets_.end()) {
    if (buckets_.size() >= config_.max_tracked) prune(now_ms);
    it = buckets_.emplace(fp, Bucket{capacity_, now_ms}).first;
  }
  Bucket& b = it->second;
  b.tokens = refilled(b, now_ms);
  b.last_refill_ms = std::max(b.last_refill_ms, now_ms);
  if (b.tokens >= kUnit) {
    b.tokens -= kUnit;
    return {true, 0};
  }
  const std::int64_t missing = kUnit - b.tokens;
  const std::int64_t per_sec = rate_per_ms_ * 1000;
  return {false, static_cast<std::uint64_t>((missing + per_sec - 1) / per_sec)};
}

double ThrottleTable::tokens(const wire::Fingerprint& fp, std::uint64_t now_ms) const {
  if (!config_.enabled) return config_.capacity;
  std::lock_guard lock(mutex_);
  auto it = buckets_.find(fp);
  if (it == buckets_.end()) return static_cast<double>(capacity_) / kUnit;
  return static_cast<double>(refilled(it->second, now_ms)) / kUnit;
}

std::size_t ThrottleTable::tracked() const {
  std::lock_guard lock(mutex_);
  return buckets_.size();
}

// Full buckets carry no state beyond a fresh one, so they can be forgotten.
void ThrottleTable::prune(std::uint64_t now_ms) {
  std::erase_if(buckets_, [&](const auto& entry) { return refilled(entry.second, now_ms) >= capacity_; });
}

}  // namespace eaas::server
