#pragma once

#include <cstdint>
#include <map>
#include <mutex>

#include "eaas/wire.hpp"

namespace eaas::server {

struct ThrottleConfig {
  bool enabled = true;
  double capacity = 5.0;        // C, tokens
  double refill_per_sec = 1.0;  // r, tokens per second (resolution 0.001)
  std::size_t max_tracked = 100000;
};

struct ThrottleDecision {
  bool allowed = false;
  std::uint64_t retry_after_s = 0;  // ceil((1 - tokens) / r) on deny
};

// Per-fingerprint token buckets. Token counts are kept as exact integers in
// millionths of a token, so refill arithmetic never drifts.
class ThrottleTable {
 public:
  static constexpr std::int64_t kUnit = 1'000'000;

  explicit ThrottleTable(ThrottleConfig config = {});

  // Refills by elapsed time, then consumes one token if available.
  ThrottleDecision check(const wire::Fingerprint& fp, std::uint64_t now_ms);

  // Token count (in tokens) the bucket would hold at `now_ms`, without consuming.
  double tokens(const wire::Fingerprint& fp, std::uint64_t now_ms) const;

  std::size_t tracked() const;
  const ThrottleConfig& config() const { return config_; }

 private:
  struct Bucket {
    std::int64_t tokens;  // millionths
    std::uint64_t last_refill_ms;
  };

  std::int64_t refilled(const Bucket& b, std::uint64_t now_ms) const;
  void prune(std::uint64_t now_ms);

  ThrottleConfig config_;
  std::int64_t capacity_;        // millionths
  std::int64_t rate_per_ms_;     // millionths of a token per ms
  mutable std::mutex mutex_;
  std::map<wire::Fingerprint, Bucket> buckets_;
};

}  // namespace eaas::server
