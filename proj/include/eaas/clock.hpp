#pragma once

#include <atomic>
#include <cstdint>

namespace eaas {

// Milliseconds since the Unix epoch, UTC. The production deployment syncs the
// host clock with NTP; tests and the simulator inject a ManualClock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::uint64_t now_ms() const = 0;
  virtual void sleep_for(std::uint64_t ms) = 0;
};

class SystemClock final : public Clock {
 public:
  std::uint64_t now_ms() const override;
  void sleep_for(std::uint64_t ms) override;
};

// Simulated time. sleep_for advances the clock instead of blocking.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::uint64_t start_ms = 0) : now_(start_ms) {}

  std::uint64_t now_ms() const override { return now_.load(); }
  void sleep_for(std::uint64_t ms) override { now_ += ms; }

  void set(std::uint64_t ms) { now_ = ms; }
  void advance(std::uint64_t ms) { now_ += ms; }

 private:
  std::atomic<std::uint64_t> now_;
};

}  // namespace eaas
