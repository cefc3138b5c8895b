#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Deterministic randomness helpers. mt19937_64's output sequence is fully
// specified by the standard, but the std distributions are not, so every
// draw that must reproduce bit-identically across toolchains goes through
// the fixed mappings below.
namespace fedcast::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream seed for (base seed, stream id) pairs. Used for
// per-building generator streams and per-round selection streams, so that
// changing unrelated parameters (round count, fleet size) never perturbs
// other streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 1));
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_real(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * unit_real(g);
}

// Standard normal via Box-Muller; two uniform draws per value.
inline double gaussian(std::mt19937_64& g) {
    double u1 = 0.0;
    do {
        u1 = unit_real(g);
    } while (u1 <= 0.0);
    const double u2 = unit_real(g);
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Uniform integer in [0, n) by rejection; exact and portable.
inline std::uint64_t bounded(std::mt19937_64& g, std::uint64_t n) {
    const std::uint64_t max = ~0ULL;
    const std::uint64_t limit = max - max % n;
    std::uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return x % n;
}

// First k entries of a Fisher-Yates shuffle of 0..n-1: a uniform sample
// without replacement. Order of the returned indices is the draw order.
inline std::vector<std::size_t> sample_without_replacement(std::mt19937_64& g,
                                                           std::size_t n,
                                                           std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(g, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

} // namespace fedcast::rng
