#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace predtree {

/// Deterministic sampler: a seeded std::mt19937_64 (whose output sequence
/// the standard pins down) with explicit transforms. std::*_distribution
/// adaptors are avoided because their output is implementation-defined.
/// Each call consumes a fixed number of engine draws, so streams are
/// reproducible across platforms and compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Box-Muller; consumes exactly two uniforms per call.
    double normal(double mean, double sd) {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

    double lognormal(double meanlog, double sdlog) {
        return std::exp(normal(meanlog, sdlog));
    }

    /// Inverse-CDF; consumes one uniform per call.
    double exponential(double rate) {
        const double u = 1.0 - uniform01();  // (0, 1]
        return -std::log(u) / rate;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling over the top multiple of n avoids modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace predtree
