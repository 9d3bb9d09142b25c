#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace softbot {

/// Seeded random stream with portable sampling helpers.
///
/// The standard distributions are implementation-defined, so every draw used
/// by evolution goes through the helpers below instead. A stream is identified
/// by a root seed plus a list of tags (generation, slot, purpose); the same
/// identity always produces the same sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Stream derived from `seed` and an ordered tag list.
    static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; one draw pair per call, no caching.
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used for seed derivation and hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace softbot
