#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "eaas/bytes.hpp"

namespace eaas {

// Supplier of randomness for key generation, padding seeds, salts and nonces.
// Implementations throw Error{RngFailure} when they cannot deliver.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
  }
};

// Operating-system CSPRNG (getrandom(2)).
class OsRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

// Reproducible stream for simulations and golden tests. Not for production keys.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mt19937_64 engine_;
};

}  // namespace eaas
