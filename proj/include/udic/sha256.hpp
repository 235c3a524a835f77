#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace udic {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(const std::uint8_t* data, std::size_t len);
Sha256Digest sha256(const std::string& s);
std::string hex_digest(const Sha256Digest& d);

}  // namespace udic
