#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include "eaas/bytes.hpp"

namespace eaas {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);

// SHA-256 over the concatenation of `parts`.
Digest sha256(std::initializer_list<ByteView> parts);

}  // namespace eaas
