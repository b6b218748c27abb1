#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vaxequity {

/// Derives an independent stream seed from the run seed and a purpose tag
/// ("split:GHA", "multistart", ...): FNV-1a of the tag mixed into the seed
/// through one splitmix64 round.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL + h;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// The standard distributions are implementation-defined; these are not, so
// artifacts stay identical across standard libraries.

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection sampling. n must be > 0.
inline std::uint64_t uniform_index(std::mt19937_64 &rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

} // namespace vaxequity
