#include "uwa/rng.hpp"

#include <cmath>
#include <numbers>

namespace uwa {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

Rng Rng::substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = seed;
    std::uint64_t key = splitmix64(state);
    for (std::uint64_t index : path) {
        std::uint64_t mix = key ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull);
        key = splitmix64(mix);
    }
    return Rng(key);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

double Rng::exponential(double mean) { return -mean * std::log(uniform_open()); }

double Rng::rayleigh(double mean_power) { return std::sqrt(-mean_power * std::log(uniform_open())); }

std::complex<double> Rng::complex_normal(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Lemire's multiply-shift with rejection; unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace uwa
