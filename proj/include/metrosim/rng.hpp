#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace metrosim {

/// Uniform draw in [0, 1) built from the engine's top 53 bits.  The
/// standard library's distribution templates are implementation-defined;
/// these transforms pin the stream to the engine's documented output.
inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// One standard-normal draw via Box–Muller (cosine branch only, no cached
/// second value, so consumption is exactly two engine outputs per call).
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = u01(rng);
    const double u2 = u01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard on the measure-zero draw
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

/// In-place Fisher–Yates shuffle with explicit bounded draws.
template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(u01(rng) * static_cast<double>(i));
        std::swap(items[i - 1], items[j < i ? j : i - 1]);
    }
}

/// Deterministic stream-splitting: mixes a base seed with a stream tag so
/// sub-generators (episodes, action noise, shuffling) never share state.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the xor-combined input.
    std::uint64_t z = seed ^ (stream + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace metrosim
