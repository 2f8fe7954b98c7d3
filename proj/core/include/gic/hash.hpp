#pragma once

#include <cstdint>
#include <string_view>

namespace gic {

// FNV-1a 64-bit. Used to key per-tensor init streams and to checksum
// checkpoint payloads.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xCBF29CE484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

} // namespace gic
