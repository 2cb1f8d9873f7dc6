#include "uwa/channel.hpp"

#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace uwa {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSingularGuard = 1e-9;

// sin(pi x) with range reduction; exact zero at integers.
double sin_pi(double x) {
    const double r = x - 2.0 * std::nearbyint(0.5 * x);  // r in [-1, 1]
    if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
    return std::sin(kPi * r);
}

double sinc(double x) { return x == 0.0 ? 1.0 : sin_pi(x) / (kPi * x); }

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidArgument("SystemConfig: " + message);
}

// Natural-log decay rate of the power-delay profile, per second.
double decay_rate(const SystemConfig& config) {
    const double tg = config.guard_duration();
    if (tg <= 0.0) return 0.0;
    return std::log(10.0) * config.total_decay_db / 10.0 / tg;
}

void write_config(io::ByteWriter& w, const SystemConfig& c) {
    w.f64(c.carrier_hz);
    w.f64(c.bandwidth_hz);
    w.u32(c.subcarriers);
    w.u32(c.guard);
    w.f64(c.rolloff);
    w.u32(c.paths);
    w.f64(c.max_speed);
    w.f64(c.sound_speed);
    w.f64(c.mean_interarrival);
    w.f64(c.total_decay_db);
}

SystemConfig read_config(io::ByteReader& r) {
    SystemConfig c;
    c.carrier_hz = r.f64("carrier_hz");
    c.bandwidth_hz = r.f64("bandwidth_hz");
    c.subcarriers = r.u32("subcarriers");
    c.guard = r.u32("guard");
    c.rolloff = r.f64("rolloff");
    c.paths = r.u32("paths");
    c.max_speed = r.f64("max_speed");
    c.sound_speed = r.f64("sound_speed");
    c.mean_interarrival = r.f64("mean_interarrival");
    c.total_decay_db = r.f64("total_decay_db");
    return c;
}

}  // namespace

void SystemConfig::validate() const {
    require(std::isfinite(carrier_hz) && carrier_hz >= 0.0, "carrier_hz must be finite and >= 0");
    require(std::isfinite(bandwidth_hz) && bandwidth_hz > 0.0, "bandwidth_hz must be > 0");
    require(subcarriers >= 2, "subcarriers must be >= 2");
    require(std::isfinite(rolloff) && rolloff > 0.0 && rolloff <= 1.0, "rolloff must lie in (0, 1]");
    require(paths >= 1, "paths must be >= 1");
    require(std::isfinite(sound_speed) && sound_speed > 0.0, "sound_speed must be > 0");
    require(std::isfinite(max_speed) && max_speed >= 0.0, "max_speed must be >= 0");
    require(max_doppler_scale() < 1.0, "max_speed / sound_speed must be < 1");
    require(std::isfinite(mean_interarrival) && mean_interarrival > 0.0, "mean_interarrival must be > 0");
    require(std::isfinite(total_decay_db) && total_decay_db >= 0.0, "total_decay_db must be >= 0");
}

std::complex<double> Path::gain(double carrier_hz) const {
    return std::polar(amplitude, -2.0 * kPi * carrier_hz * delay);
}

void validate_paths(const PathSet& set, const SystemConfig& config) {
    if (set.paths.size() != config.paths) {
        throw InvalidArgument("PathSet: expected " + std::to_string(config.paths) + " paths, got " +
                              std::to_string(set.paths.size()));
    }
    const double a_max = config.max_doppler_scale();
    double previous = 0.0;
    for (std::size_t p = 0; p < set.paths.size(); ++p) {
        const auto& path = set.paths[p];
        if (!std::isfinite(path.amplitude) || !std::isfinite(path.delay) || !std::isfinite(path.scale)) {
            throw InvalidArgument("PathSet: non-finite parameter on path " + std::to_string(p));
        }
        if (path.amplitude < 0.0) throw InvalidArgument("PathSet: negative amplitude on path " + std::to_string(p));
        if (path.delay < previous) throw InvalidArgument("PathSet: delays must be sorted and >= 0");
        if (std::abs(path.scale) > a_max) throw InvalidArgument("PathSet: |a_p| exceeds a_max on path " + std::to_string(p));
        previous = path.delay;
    }
}

double raised_cosine_normalized(double x, double rolloff) {
    if (x == 0.0) return 1.0;
    const double bx = 2.0 * rolloff * x;
    const double denom = 1.0 - bx * bx;
    if (std::abs(denom) < kSingularGuard) return 0.25 * kPi * sinc(0.5 / rolloff);
    return sinc(x) * std::cos(kPi * rolloff * x) / denom;
}

double raised_cosine(double t, double period, double rolloff) { return raised_cosine_normalized(t / period, rolloff); }

double path_power_normalization(const SystemConfig& config) {
    // tau_p is a sum of p-1 exponentials, so E[exp(-s tau_p)] = (1 + s m)^-(p-1).
    const double ratio = 1.0 / (1.0 + decay_rate(config) * config.mean_interarrival);
    double total = 0.0, term = 1.0;
    for (std::uint32_t p = 0; p < config.paths; ++p) {
        total += term;
        term *= ratio;
    }
    return 1.0 / total;
}

double expected_path_power(const SystemConfig& config, double delay) {
    return path_power_normalization(config) * std::exp(-decay_rate(config) * delay);
}

PathSet sample_paths(const SystemConfig& config, Rng& rng) {
    const double norm = path_power_normalization(config);
    const double rate = decay_rate(config);
    const double a_max = config.max_doppler_scale();

    PathSet set;
    set.paths.resize(config.paths);
    double tau = 0.0;
    for (std::uint32_t p = 0; p < config.paths; ++p) {
        if (p > 0) tau += rng.exponential(config.mean_interarrival);
        set.paths[p].delay = tau;
    }
    for (auto& path : set.paths) {
        path.amplitude = rng.rayleigh(norm * std::exp(-rate * path.delay));
        const double theta = rng.uniform(-kPi, kPi);
        path.scale = std::clamp(a_max * std::cos(theta), -a_max, a_max);
    }
    return set;
}

namespace {

struct PathTerm {
    std::complex<double> gain;
    double phase_rate;  // radians per received sample
    double stretch;     // 1 + a_p
    double delay;       // in samples
};

std::vector<PathTerm> prepare_terms(const PathSet& set, const SystemConfig& config) {
    const double period = config.sample_period();
    std::vector<PathTerm> terms;
    terms.reserve(set.paths.size());
    for (const auto& p : set.paths) {
        terms.push_back({p.gain(config.carrier_hz), 2.0 * kPi * p.scale * config.carrier_hz * period, 1.0 + p.scale,
                         p.delay / period});
    }
    return terms;
}

}  // namespace

ComplexMatrix build_channel_matrix(const PathSet& set, const SystemConfig& config) {
    const std::size_t rows = config.received_length();
    const std::size_t cols = config.subcarriers;
    const auto terms = prepare_terms(set, config);
    ComplexMatrix h(rows, cols);
#pragma omp parallel for schedule(static) if (rows * cols * terms.size() >= 4096)
    for (std::size_t n = 0; n < rows; ++n) {
        auto out = h.row(n);
        const double sample = static_cast<double>(n);
        for (const auto& t : terms) {
            const std::complex<double> weight = t.gain * std::polar(1.0, t.phase_rate * sample);
            const double base = t.stretch * sample - t.delay;
            for (std::size_t c = 0; c < cols; ++c) {
                out[c] += weight * raised_cosine_normalized(base - static_cast<double>(c), config.rolloff);
            }
        }
    }
    return h;
}

namespace reference {

ComplexMatrix build_channel_matrix(const PathSet& set, const SystemConfig& config) {
    const std::size_t rows = config.received_length();
    const std::size_t cols = config.subcarriers;
    const auto terms = prepare_terms(set, config);
    ComplexMatrix h(rows, cols);
    for (std::size_t n = 0; n < rows; ++n) {
        auto out = h.row(n);
        const double sample = static_cast<double>(n);
        for (const auto& t : terms) {
            const std::complex<double> weight = t.gain * std::polar(1.0, t.phase_rate * sample);
            const double base = t.stretch * sample - t.delay;
            for (std::size_t c = 0; c < cols; ++c) {
                out[c] += weight * raised_cosine_normalized(base - static_cast<double>(c), config.rolloff);
            }
        }
    }
    return h;
}

}  // namespace reference

ChannelDataset generate_dataset(const SystemConfig& config, std::uint64_t seed, std::size_t count) {
    config.validate();
    if (count == 0) throw InvalidArgument("generate_dataset: count must be >= 1");
    ChannelDataset ds{config, seed, std::vector<PathSet>(count)};
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng::substream(seed, {i});
        ds.realizations[i] = sample_paths(config, rng);
    }
    return ds;
}

void save_dataset(const ChannelDataset& ds, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("UWAD");
    w.u32(kDatasetVersion);
    write_config(w, ds.config);
    w.u32(kRngAlgorithmId);
    w.u64(ds.seed);
    w.u32(static_cast<std::uint32_t>(ds.realizations.size()));
    for (const auto& set : ds.realizations) {
        if (set.paths.size() != ds.config.paths) throw InvalidArgument("save_dataset: path count differs from config");
        for (const auto& p : set.paths) {
            w.f64(p.amplitude);
            w.f64(p.delay);
            w.f64(p.scale);
        }
    }
    io::write_file_atomic(path, w.bytes());
}

ChannelDataset load_dataset(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path));
    r.expect_magic("UWAD");
    const std::uint32_t version = r.u32("version");
    if (version != kDatasetVersion) {
        throw VersionError("dataset " + path.string() + ": unsupported version " + std::to_string(version));
    }
    ChannelDataset ds;
    const std::uint64_t config_offset = r.offset();
    ds.config = read_config(r);
    try {
        ds.config.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid configuration: ") + e.what(), config_offset);
    }
    const std::uint32_t rng_id = r.u32("rng_algorithm");
    if (rng_id != kRngAlgorithmId) {
        throw VersionError("dataset " + path.string() + ": unknown RNG algorithm id " + std::to_string(rng_id));
    }
    ds.seed = r.u64("seed");
    const std::uint32_t count = r.u32("count");
    const std::uint64_t body = std::uint64_t{count} * ds.config.paths * 3 * sizeof(double);
    if (r.remaining() != body) {
        throw FormatError("body holds " + std::to_string(r.remaining()) + " bytes, header implies " +
                              std::to_string(body),
                          r.offset());
    }
    ds.realizations.resize(count);
    for (auto& set : ds.realizations) {
        const std::uint64_t record_offset = r.offset();
        set.paths.resize(ds.config.paths);
        for (auto& p : set.paths) {
            p.amplitude = r.f64("amplitude");
            p.delay = r.f64("delay");
            p.scale = r.f64("scale");
        }
        try {
            validate_paths(set, ds.config);
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), record_offset);
        }
    }
    r.expect_end();
    return ds;
}

ChannelDataset load_dataset(const std::filesystem::path& path, const SystemConfig& expected) {
    ChannelDataset ds = load_dataset(path);
    if (!(ds.config == expected)) {
        throw VersionError("dataset " + path.string() + " was generated with a different system configuration");
    }
    return ds;
}

DatasetSummary summarize(const ChannelDataset& ds) {
    DatasetSummary s;
    s.min_scale = std::numeric_limits<double>::infinity();
    s.max_scale = -std::numeric_limits<double>::infinity();

    constexpr std::size_t kBins = 20;
    std::vector<double> bin_x(kBins), bin_power(kBins);
    std::vector<std::size_t> bin_n(kBins);
    const double tg = ds.config.guard_duration();

    double gap_sum = 0.0;
    std::size_t gaps = 0;
    for (const auto& set : ds.realizations) {
        for (std::size_t p = 0; p < set.paths.size(); ++p) {
            const auto& path = set.paths[p];
            if (p > 0) {
                gap_sum += path.delay - set.paths[p - 1].delay;
                ++gaps;
            }
            s.min_scale = std::min(s.min_scale, path.scale);
            s.max_scale = std::max(s.max_scale, path.scale);
            ++s.path_count;
            if (tg > 0.0 && path.delay <= tg) {
                const double x = path.delay / tg;
                const auto b = std::min(kBins - 1, static_cast<std::size_t>(x * kBins));
                bin_x[b] += x;
                bin_power[b] += path.amplitude * path.amplitude;
                ++bin_n[b];
            }
        }
    }
    s.mean_interarrival = gaps > 0 ? gap_sum / static_cast<double>(gaps) : 0.0;

    // Least-squares line through (mean x, 10 log10 mean A^2) of the populated bins.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
        if (bin_n[b] < 2 || bin_power[b] <= 0.0) continue;
        const double x = bin_x[b] / static_cast<double>(bin_n[b]);
        const double y = 10.0 * std::log10(bin_power[b] / static_cast<double>(bin_n[b]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used >= 2) {
        const double n = static_cast<double>(used);
        const double den = n * sxx - sx * sx;
        s.decay_slope_db = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    }
    return s;
}

}  // namespace uwa
