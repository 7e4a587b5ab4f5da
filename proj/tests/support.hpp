#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <unistd.h>

#include "eaas/bytes.hpp"
#include "eaas/crypto.hpp"
#include "eaas/random.hpp"

namespace eaas::test {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(EAAS_TEST_DATA) / name;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

// Keygen costs most of a second; each label is generated once per binary.
inline const crypto::KeyPair& key(const std::string& label) {
  static std::map<std::string, crypto::KeyPair> cache;
  auto it = cache.find(label);
  if (it == cache.end()) {
    std::uint64_t seed = 0xe9a5;
    for (char c : label) seed = seed * 131 + static_cast<unsigned char>(c);
    SeededRandom rng(seed);
    it = cache.emplace(label, crypto::generate_keypair(rng)).first;
  }
  return it->second;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("eaas-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace eaas::test
