#pragma once

// Delay-scale (wideband Doppler) multipath channel: stochastic path sets,
// the sampled channel matrix, and on-disk datasets of path sets.

#include "uwa/numerics.hpp"
#include "uwa/rng.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace uwa {

inline constexpr double kKnot = 1852.0 / 3600.0;  // m/s

struct SystemConfig {
    double carrier_hz = 12.5e3;
    double bandwidth_hz = 5e3;  // sample period T = 1 / bandwidth
    std::uint32_t subcarriers = 256;
    std::uint32_t guard = 64;  // zero-padding length in samples
    double rolloff = 0.65;
    std::uint32_t paths = 8;
    double max_speed = 20.0 * kKnot;  // m/s
    double sound_speed = 1500.0;
    double mean_interarrival = 1e-3;  // s
    double total_decay_db = 20.0;     // power decay across the guard interval

    double sample_period() const { return 1.0 / bandwidth_hz; }
    double guard_duration() const { return guard * sample_period(); }
    double max_doppler_scale() const { return max_speed / sound_speed; }
    std::size_t received_length() const { return std::size_t{subcarriers} + guard; }

    // Throws InvalidArgument naming the offending field.
    void validate() const;

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

struct Path {
    double amplitude = 0.0;  // A_p >= 0
    double delay = 0.0;      // tau_p, seconds
    double scale = 0.0;      // a_p, dimensionless Doppler scale

    // h_p = A_p exp(-j 2 pi f_c tau_p)
    std::complex<double> gain(double carrier_hz) const;

    friend bool operator==(const Path&, const Path&) = default;
};

struct PathSet {
    std::vector<Path> paths;

    friend bool operator==(const PathSet&, const PathSet&) = default;
};

// Throws InvalidArgument if delays are unsorted/negative or |a_p| > a_max.
void validate_paths(const PathSet& paths, const SystemConfig& config);

// Raised-cosine impulse response with unit peak. The removable singularities at
// t = 0 and |t| = T / (2 beta) are evaluated by their limits.
double raised_cosine(double t, double period, double rolloff);

// Same pulse with time measured in sample periods.
double raised_cosine_normalized(double x, double rolloff);

// 1 / sum_p E[w(tau_p)], where w is the exponential power-delay profile; scales the
// per-path Rayleigh powers so the ensemble path power sums to one.
double path_power_normalization(const SystemConfig& config);

// Expected A_p^2 for a path arriving at `delay`.
double expected_path_power(const SystemConfig& config, double delay);

// One realization: tau_1 = 0, exponential inter-arrivals, Rayleigh amplitudes
// with exponentially decaying mean power, a_p = a_max cos(theta_p).
PathSet sample_paths(const SystemConfig& config, Rng& rng);

// (N + N_g) x N matrix mapping transmitted samples to received samples.
ComplexMatrix build_channel_matrix(const PathSet& paths, const SystemConfig& config);

namespace reference {

ComplexMatrix build_channel_matrix(const PathSet& paths, const SystemConfig& config);

}  // namespace reference

struct ChannelDataset {
    SystemConfig config;
    std::uint64_t seed = 0;
    std::vector<PathSet> realizations;

    std::size_t size() const noexcept { return realizations.size(); }
    ComplexMatrix channel(std::size_t i) const { return build_channel_matrix(realizations.at(i), config); }
};

inline constexpr std::uint32_t kDatasetVersion = 1;

// Realization i is drawn from Rng::substream(seed, {i}), so the result does not
// depend on the number of worker threads.
ChannelDataset generate_dataset(const SystemConfig& config, std::uint64_t seed, std::size_t count);

void save_dataset(const ChannelDataset& dataset, const std::filesystem::path& path);

// Throws FormatError on malformed content and VersionError on an unknown version or RNG id.
ChannelDataset load_dataset(const std::filesystem::path& path);

// As above, additionally throwing VersionError if the stored configuration differs from `expected`.
ChannelDataset load_dataset(const std::filesystem::path& path, const SystemConfig& expected);

// Summary statistics printed by the dataset generator.
struct DatasetSummary {
    double mean_interarrival = 0.0;  // s
    double decay_slope_db = 0.0;     // fitted 10 log10 E[A^2] slope per guard interval
    double min_scale = 0.0;
    double max_scale = 0.0;
    std::size_t path_count = 0;
};

DatasetSummary summarize(const ChannelDataset& dataset);

}  // namespace uwa
