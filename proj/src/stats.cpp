#include "eaas/stats.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <limits>

#include "eaas/error.hpp"

namespace eaas::stats {

double monobit_z(ByteView data) {
  std::uint64_t ones = 0;
  for (auto b : data) ones += static_cast<std::uint64_t>(std::popcount(b));
  const double n = 8.0 * static_cast<double>(data.size());
  if (n == 0) return 0;
  return std::abs(2.0 * static_cast<double>(ones) - n) / std::sqrt(n);
}

double runs_z(ByteView data) {
  std::uint64_t ones = 0;
  std::uint64_t runs = 0;
  int prev = -1;
  for (auto b : data) {
    ones += static_cast<std::uint64_t>(std::popcount(b));
    for (int bit = 7; bit >= 0; --bit) {
      int v = (b >> bit) & 1;
      if (v != prev) ++runs;
      prev = v;
    }
  }
  const double n = 8.0 * static_cast<double>(data.size());
  const double n1 = static_cast<double>(ones);
  const double n0 = n - n1;
  if (n < 2 || n0 == 0 || n1 == 0) return std::numeric_limits<double>::infinity();
  const double mu = 2.0 * n0 * n1 / n + 1.0;
  const double var = (mu - 1.0) * (mu - 2.0) / (n - 1.0);
  if (var <= 0) return std::numeric_limits<double>::infinity();
  return (static_cast<double>(runs) - mu) / std::sqrt(var);
}

double chi_square_bytes(ByteView data) {
  std::array<std::uint64_t, 256> counts{};
  for (auto b : data) ++counts[b];
  const double expected = static_cast<double>(data.size()) / 256.0;
  double chi = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi += d * d / expected;
  }
  return chi;
}

std::vector<TestResult> stats_suite(ByteView data, const Thresholds& t) {
  if (data.size() < kMinInput) {
    throw Error(Errc::InputTooShort, std::to_string(data.size()) + " bytes, need " + std::to_string(kMinInput));
  }
  std::vector<TestResult> out;
  const double mono = monobit_z(data);
  out.push_back({"monobit", mono, mono < t.z_limit});
  const double runs = runs_z(data);
  out.push_back({"runs", runs, std::abs(runs) < t.z_limit});
  const double chi = chi_square_bytes(data);
  out.push_back({"chi-square", chi, chi >= t.chi_low && chi <= t.chi_high});
  return out;
}

bool all_pass(const std::vector<TestResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace eaas::stats
