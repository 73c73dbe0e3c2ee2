#pragma once

#include <cstdint>
#include <random>

namespace nortasp {

namespace detail {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-draw substream keyed by (seed, draw) so draws are independent of
// evaluation order.
inline std::mt19937_64 draw_stream(std::uint64_t seed, std::uint64_t draw) {
  return std::mt19937_64(mix64(mix64(seed) ^ draw));
}

// Uniform on the open interval (0, 1) from the top 53 bits.
inline double open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

}  // namespace nortasp
