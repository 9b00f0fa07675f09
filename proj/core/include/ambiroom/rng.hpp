#pragma once

#include <cmath>
#include <cstdint>

namespace ambiroom {

// Counter-based pseudo-random stream (SplitMix64 finalizer over a keyed
// counter). Two properties matter here: streams derived from the same
// (seed, stream) pair are identical regardless of call interleaving in
// other streams, and there is no hidden global state, so dataset
// synthesis stays byte-reproducible under any parallel schedule.
class StreamRng {
public:
    explicit StreamRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ull) ^ mix(stream ^ 0xbb67ae8584caa73bull))) {}

    std::uint64_t next_u64() {
        return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Log-uniform in [lo, hi], lo > 0.
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Standard normal via Box-Muller; both uniforms drawn fresh per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Independent child stream; deterministic in (this stream's key, tag).
    StreamRng split(std::uint64_t tag) const {
        StreamRng child(0, 0);
        child.key_ = mix(key_ ^ mix(tag + 0x3c6ef372fe94f82bull));
        return child;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace ambiroom
