#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace gridwatch {

// All randomness in the project flows through mt19937_64, whose output
// sequence is fully pinned by the standard. The helpers below avoid
// std::uniform_*/normal_distribution, whose draw algorithms are
// implementation-defined, so seeded results are identical across toolchains.
using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for deriving sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return mix64(derive_seed(base, a) ^ mix64(b + 0x5851f42d4c957f2dULL));
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1]; never zero, safe as a log() argument.
inline double unit_double_open(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * unit_double(rng);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller; one draw per call (the cosine twin is
// discarded to keep the stream position a simple function of call count).
inline double gaussian(Rng& rng) {
    const double u1 = unit_double_open(rng);
    const double u2 = unit_double(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gridwatch
