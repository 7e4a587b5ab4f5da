#pragma once

// Output-quality checks for delivered entropy: monobit, Wald-Wolfowitz runs
// and a byte-value chi-square, each at a two-sided 1e-4 level.

#include <string>
#include <vector>

#include "eaas/bytes.hpp"

namespace eaas::stats {

inline constexpr std::size_t kMinInput = std::size_t{1} << 20;

struct Thresholds {
  double z_limit = 3.89;  // |z| < 3.89, two-sided ~1e-4
  // chi-square with 255 degrees of freedom, 5e-5 in each tail.
  double chi_low = 176.39;
  double chi_high = 352.43;
};

struct TestResult {
  std::string name;
  double statistic = 0;
  bool pass = false;
};

// z = |2 * ones - n| / sqrt(n) over all bits.
double monobit_z(ByteView data);
// (R - mu) / sigma with mu = 2 n0 n1 / n + 1, sigma^2 = (mu - 1)(mu - 2) / (n - 1).
double runs_z(ByteView data);
// sum over byte values of (observed - expected)^2 / expected.
double chi_square_bytes(ByteView data);

// Throws Error{InputTooShort} below kMinInput bytes.
std::vector<TestResult> stats_suite(ByteView data, const Thresholds& thresholds = {});

bool all_pass(const std::vector<TestResult>& results);

}  // namespace eaas::stats
