#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vsal {

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard, and all value transforms are implemented here rather than via
// std::*_distribution (whose outputs are implementation-defined), so a given
// seed reproduces identical streams on any conforming toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (one value per call; no cached spare,
    // which keeps the stream position independent of call parity).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream; streams forked with distinct tags from the
    // same parent seed are uncorrelated.
    Rng fork(std::uint64_t tag) const { return Rng(seed_ ^ (0x9e3779b97f4a7c15ull * (tag + 1))); }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t mix(std::uint64_t x) {
        std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
};

}  // namespace vsal
