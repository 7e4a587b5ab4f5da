#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "eaas/pool.hpp"

namespace eaas::pool {

enum class SourceKind { OsRandom, FileReplay, Constant, SimulatedSensor };

// Parses "os-random", "file-replay", "constant", "simulated-sensor".
SourceKind parse_source_kind(std::string_view name);
std::string_view to_string(SourceKind kind);

struct SourceSpec {
  SourceDescriptor descriptor;
  SourceKind kind = SourceKind::OsRandom;
  std::filesystem::path replay_file;  // file-replay
  std::uint8_t constant_byte = 0;     // constant
  std::uint64_t seed = 0;             // simulated-sensor
};

// Reads from getrandom(2).
ByteSupplier os_random_supplier();
// Serves the file's bytes once, in order; throws Error{EntropyDepleted} at EOF.
ByteSupplier file_replay_supplier(const std::filesystem::path& path);
// Stuck-at source for tests.
ByteSupplier constant_supplier(std::uint8_t value);
// Seeded noise generator standing in for a physical sensor.
ByteSupplier simulated_sensor_supplier(std::uint64_t seed);

ByteSupplier make_supplier(const SourceSpec& spec);

}  // namespace eaas::pool
