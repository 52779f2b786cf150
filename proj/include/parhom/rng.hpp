#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers: every draw is a pure function of a key built
// from explicit 64-bit words (seed, stream tag, lattice coordinates, step,
// component, ...).  Evaluation order therefore never affects results, and any
// site/step can be queried in O(1) from any thread.

namespace parhom::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Vigna); full-avalanche 64-bit mixer.
inline std::uint64_t mix(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

namespace detail {
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t w) {
    return mix(h ^ mix(w));
}
}  // namespace detail

template <typename... Words>
std::uint64_t key(std::uint64_t seed, Words... words) {
    std::uint64_t h = mix(seed);
    ((h = detail::absorb(h, static_cast<std::uint64_t>(words))), ...);
    return h;
}

// Uniform on (0,1]; never returns 0 so it is safe under log().
inline double u01(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 1.0) * 0x1p-53;
}

// One standard normal per key (Box-Muller, cosine branch).
inline double gaussian(std::uint64_t h) {
    const double u1 = u01(mix(h ^ 0xA511E9B3ull));
    const double u2 = u01(mix(h ^ 0x61C88647ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Poisson with unit mean by CDF inversion; used for renewal counts per slot.
inline int poisson1(std::uint64_t h) {
    double u = u01(h);
    double p = 0.36787944117144232159552377016146;  // e^{-1}
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 32) {
        ++k;
        p /= static_cast<double>(k);
        cdf += p;
    }
    return k;
}

}  // namespace parhom::rng
