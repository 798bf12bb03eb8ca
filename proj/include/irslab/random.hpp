// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams.
//
// Every random quantity in irslab is drawn from a substream addressed by
// (master seed, stream tag, index). Substreams are derived by hashing, so the
// draws for trial t never depend on how many trials run or on which worker
// thread executes them.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace irslab {

/// SplitMix64 step. Advances `state` and returns the next output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** 1.0. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    friend constexpr bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
};

enum class StreamTag : std::uint64_t {
    ApPosition = 1,
    ShadowDirect = 2,
    ShadowApIrs = 3,
    ShadowIrsDest = 4,
    Trial = 5,
};

/// Seed of the substream (master, tag, index).
constexpr std::uint64_t substream_seed(std::uint64_t master, StreamTag tag,
                                       std::uint64_t index) noexcept {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ static_cast<std::uint64_t>(tag);
    h = splitmix64(s);
    s = h ^ index;
    return splitmix64(s);
}

constexpr Xoshiro256 substream(std::uint64_t master, StreamTag tag, std::uint64_t index) noexcept {
    return Xoshiro256(substream_seed(master, tag, index));
}

// Variate transforms are written out rather than taken from <random> so that
// a seed reproduces the same numbers with every standard library.

/// Uniform on [0, 1), 53-bit resolution.
template <class Engine>
double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
template <class Engine>
double uniform_open_closed(Engine& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Uniform on [lo, hi).
template <class Engine>
double uniform(Engine& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform phase on [-pi, pi).
template <class Engine>
double uniform_phase(Engine& rng) {
    const double p = -std::numbers::pi + 2.0 * std::numbers::pi * uniform01(rng);
    return p < std::numbers::pi ? p : -std::numbers::pi;
}

/// Standard normal via Box-Muller (cosine branch only).
template <class Engine>
double standard_normal(Engine& rng) {
    const double u1 = uniform_open_closed(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Rayleigh envelope with density (x/xi) exp(-x^2 / (2 xi)), by inverse CDF.
template <class Engine>
double rayleigh(Engine& rng, double xi) {
    return std::sqrt(-2.0 * xi * std::log(uniform_open_closed(rng)));
}

}  // namespace irslab
