#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace twofluid {

// Counter-based deterministic RNG helpers.  Field synthesis derives one phase
// per (seed, lattice index, component) triple, so the result does not depend
// on traversal order or thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Mix an ordered list of words into one 64-bit value.
inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// Uniform double in [0,1) from a 64-bit word (53 mantissa bits).
inline double u01(std::uint64_t w) {
  return static_cast<double>(w >> 11) * 0x1.0p-53;
}

// FNV-1a over bytes; used for config/provenance hashes and checkpoint checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v);

// Format a double with 17 significant digits (shortest exact round trip is not
// required by the report contract; 17 digits always reproduce the bit pattern).
std::string format_g17(double v);

}  // namespace twofluid
