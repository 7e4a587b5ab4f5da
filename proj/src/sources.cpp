#include "eaas/sources.hpp"

#include <fstream>
#include <iterator>
#include <memory>

#include "eaas/error.hpp"
#include "eaas/random.hpp"

namespace eaas::pool {

SourceKind parse_source_kind(std::string_view name) {
  if (name == "os-random") return SourceKind::OsRandom;
  if (name == "file-replay") return SourceKind::FileReplay;
  if (name == "constant") return SourceKind::Constant;
  if (name == "simulated-sensor") return SourceKind::SimulatedSensor;
  throw Error(Errc::ConfigError, "unknown source kind '" + std::string(name) + "'");
}

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::OsRandom: return "os-random";
    case SourceKind::FileReplay: return "file-replay";
    case SourceKind::Constant: return "constant";
    case SourceKind::SimulatedSensor: return "simulated-sensor";
  }
  return "?";
}

ByteSupplier os_random_supplier() {
  return [rng = std::make_shared<OsRandom>()](std::span<std::uint8_t> out) { rng->fill(out); };
}

ByteSupplier file_replay_supplier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot open replay file " + path.string());
  auto data = std::make_shared<Bytes>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  auto pos = std::make_shared<std::size_t>(0);
  return [data, pos](std::span<std::uint8_t> out) {
    if (data->size() - *pos < out.size()) throw Error(Errc::EntropyDepleted, "replay file exhausted");
    std::copy_n(data->begin() + static_cast<std::ptrdiff_t>(*pos), out.size(), out.begin());
    *pos += out.size();
  };
}

ByteSupplier constant_supplier(std::uint8_t value) {
  return [value](std::span<std::uint8_t> out) { std::fill(out.begin(), out.end(), value); };
}

ByteSupplier simulated_sensor_supplier(std::uint64_t seed) {
  return [rng = std::make_shared<SeededRandom>(seed)](std::span<std::uint8_t> out) { rng->fill(out); };
}

ByteSupplier make_supplier(const SourceSpec& spec) {
  switch (spec.kind) {
    case SourceKind::OsRandom: return os_random_supplier();
    case SourceKind::FileReplay: return file_replay_supplier(spec.replay_file);
    case SourceKind::Constant: return constant_supplier(spec.constant_byte);
    case SourceKind::SimulatedSensor: return simulated_sensor_supplier(spec.seed);
  }
  throw Error(Errc::ConfigError, "unknown source kind");
}

}  // namespace eaas::pool
