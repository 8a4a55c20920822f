#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace damprank {

// Counter-based generator: every output is a pure function of (seed, counter),
// so streams can be evaluated out of order and results are bit-reproducible.
// The mix is SplitMix64 applied to seed + counter * golden-ratio increment.
inline std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform draw in the open interval (0, 1).
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
    // 53 significant bits, offset by half an ulp so 0 is excluded.
    return (static_cast<double>(splitmix64(seed, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw i: Box-Muller on counters (2i, 2i+1).
inline double standard_normal(std::uint64_t seed, std::uint64_t index) {
    const double u1 = uniform01(seed, 2 * index);
    const double u2 = uniform01(seed, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace damprank
