#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fednb {

// Portable seeded randomness. Every site must derive identical train/test
// splits from a shared seed without exchanging row lists, so the generator is
// pinned to a named algorithm instead of the (unspecified) std:: distributions:
//
//   * state expansion / stream derivation: SplitMix64
//   * stream generator: xoshiro256++ (Blackman & Vigna)
//   * bounded integers: rejection sampling (the arc4random_uniform construction)
//   * doubles in [0,1): top 53 bits of one output, scaled by 2^-53
//
// Integer outputs are bit-identical on every conforming platform. Gaussian
// samples go through Box-Muller (log/cos/sin), which is only as reproducible
// as the platform libm; nothing in the protocol depends on cross-platform
// noise equality, only on split equality.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives the seed of an independent child stream from (seed, tag). Used to
// key per-repeat shuffle streams and per-(site, attribute) noise streams.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = tag + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    std::uint64_t state = seed ^ z;
    return splitmix64_next(state);
}

class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound), bound >= 1. Rejection keeps it exactly
    // uniform; the loop terminates with probability 1.
    std::uint64_t bounded(std::uint64_t bound) {
        const std::uint64_t threshold = (-bound) % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform double in [0,1), 53 significant bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; second sample of each pair is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        have_cached_ = true;
        return radius * std::cos(angle);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace fednb
