#pragma once

#include <cstdint>
#include <random>

namespace segfair {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to fan a master seed out to independent streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based derivation: stream `index` of `master` (with an optional domain tag
// so the same index used for different purposes never collides).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t tag = 0) noexcept {
    return mix64(mix64(master ^ mix64(tag)) + index);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline long long uniform_int(Rng& rng, long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace segfair
