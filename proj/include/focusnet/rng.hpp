#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace focusnet {

// Seedable generator with hand-rolled transforms so the stream is identical
// across standard-library implementations (std distributions are not
// guaranteed to be).
class RngState {
public:
    explicit RngState(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller, one value per call (no caching, so the
    // stream position stays a pure function of the call count).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Derived substream for (sample, epoch)-style decorrelation.
    RngState substream(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t s = seed_mix(seed_ ^ (a * 0x9e3779b97f4a7c15ull) ^ seed_mix(b + 0x165667b19e3779f9ull));
        return RngState(s);
    }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        engine_.seed(seed);
    }

private:
    static std::uint64_t seed_mix(std::uint64_t x) {
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdull;
        x ^= x >> 33;
        x *= 0xc4ceb9fe1a85ec53ull;
        x ^= x >> 33;
        return x;
    }

    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace focusnet
