#pragma once

// Pinned random stream: xoshiro256** seeded through splitmix64.
//
// Distributions are implemented here rather than taken from <random>, whose
// normal/exponential algorithms are implementation-defined; datasets must be
// reproducible across standard libraries.

#include <complex>
#include <cstdint>
#include <initializer_list>

namespace uwa {

// Written into dataset headers so a reader can refuse streams it cannot reproduce.
inline constexpr std::uint32_t kRngAlgorithmId = 0x58533235;  // "XS25": xoshiro256** + splitmix64 substreams

std::uint64_t splitmix64(std::uint64_t& state);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent stream for (seed, i0, i1, ...). Used per realization / per trial
    // so results do not depend on scheduling.
    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

    std::uint64_t next_u64();

    // [0, 1) with 53 random bits.
    double uniform();
    // (0, 1]; safe for log().
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();
    double exponential(double mean);
    // Rayleigh amplitude with E[A^2] = mean_power.
    double rayleigh(double mean_power);
    // Circularly-symmetric complex Gaussian, E|z|^2 = variance.
    std::complex<double> complex_normal(double variance);

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    bool bit() { return (next_u64() >> 63) != 0; }

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace uwa
