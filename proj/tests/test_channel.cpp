#include "doctest.h"
#include "oracles.hpp"

#include "uwa/channel.hpp"
#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace uwa;

namespace {

SystemConfig small(std::uint32_t n, std::uint32_t guard) {
    SystemConfig c;
    c.subcarriers = n;
    c.guard = guard;
    return c;
}

std::filesystem::path scratch(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / "uwa_channel_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("raised cosine values") {
    const double t = 2e-4;
    CHECK(raised_cosine(0.0, t, 0.65) == 1.0);
    for (double beta : {0.1, 0.35, 0.65, 1.0}) {
        CHECK(std::abs(raised_cosine(3 * t, t, beta)) < 1e-12);
        CHECK(std::abs(raised_cosine(-5 * t, t, beta)) < 1e-12);
    }
    // Limit at the singular point, against the closed form and against its neighbours.
    const double y = 1.0 / 1.3;
    const double limit = std::numbers::pi / 4.0 * std::sin(std::numbers::pi * y) / (std::numbers::pi * y);
    CHECK(limit == doctest::Approx(0.2153).epsilon(1e-3));
    const double ts = t / 1.3;
    CHECK(raised_cosine(ts, t, 0.65) == doctest::Approx(limit).epsilon(1e-14));
    CHECK(raised_cosine(-ts, t, 0.65) == doctest::Approx(limit).epsilon(1e-14));
    for (double off : {1e-6, 1e-7, 1e-8}) {
        CHECK(std::abs(raised_cosine(ts * (1 + off), t, 0.65) - limit) < 1e-5);
        CHECK(std::abs(raised_cosine(ts * (1 - off), t, 0.65) - limit) < 1e-5);
    }
    CHECK(raised_cosine_normalized(0.4, 0.65) == doctest::Approx(raised_cosine(0.4 * t, t, 0.65)).epsilon(1e-14));
}

TEST_CASE("single path realization") {
    auto c = small(16, 4);
    c.paths = 1;
    Rng rng(3);
    double power = 0.0;
    constexpr int reps = 100000;
    for (int i = 0; i < reps; ++i) {
        const auto ps = sample_paths(c, rng);
        REQUIRE(ps.paths.size() == 1);
        CHECK(ps.paths[0].delay == 0.0);
        CHECK(std::abs(ps.paths[0].scale) <= c.max_doppler_scale());
        power += ps.paths[0].amplitude * ps.paths[0].amplitude;
    }
    CHECK(power / reps == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("path statistics at the default configuration") {
    const SystemConfig c;
    const auto ds = generate_dataset(c, 2024, 100000 / c.paths);
    const auto s = summarize(ds);
    CHECK(s.path_count == 100000);
    CHECK(s.mean_interarrival == doctest::Approx(1e-3).epsilon(0.01));
    CHECK(s.decay_slope_db == doctest::Approx(-20.0).epsilon(0.5 / 20.0));
    CHECK(s.max_scale <= c.max_doppler_scale());
    CHECK(s.min_scale >= -c.max_doppler_scale());
    for (const auto& ps : ds.realizations) CHECK_NOTHROW(validate_paths(ps, c));
}

TEST_CASE("ensemble path power is normalized") {
    SystemConfig c;
    c.paths = 4;
    double sum = 0.0;
    Rng rng(12);
    constexpr int reps = 50000;
    for (int i = 0; i < reps; ++i)
        for (const auto& p : sample_paths(c, rng).paths) sum += p.amplitude * p.amplitude;
    CHECK(sum / reps == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("identity and pure-delay channels") {
    const auto c = small(8, 3);
    PathSet one{{Path{1.0, 0.0, 0.0}}};
    const auto h = build_channel_matrix(one, c);
    REQUIRE(h.rows() == 11);
    REQUIRE(h.cols() == 8);
    for (std::size_t r = 0; r < 11; ++r)
        for (std::size_t k = 0; k < 8; ++k) CHECK(h(r, k) == cplx(r == k ? 1.0 : 0.0));

    for (std::size_t d = 1; d <= 3; ++d) {
        PathSet delayed{{Path{1.0, d * c.sample_period(), 0.0}}};
        const auto hd = build_channel_matrix(delayed, c);
        const cplx phase = std::exp(cplx(0.0, -2.0 * std::numbers::pi * c.carrier_hz * d * c.sample_period()));
        for (std::size_t r = 0; r < 11; ++r)
            for (std::size_t k = 0; k < 8; ++k)
                CHECK(std::abs(hd(r, k) - (r == k + d ? phase : cplx(0.0))) < 1e-12);
    }
}

TEST_CASE("channel matrix matches direct evaluation") {
    const auto c = small(8, 2);
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        auto cfg = c;
        cfg.paths = 4;
        cfg.mean_interarrival = 0.6 * c.sample_period();
        const auto ps = sample_paths(cfg, rng);
        const auto want = oracle::channel_matrix(ps, cfg);
        const auto got = build_channel_matrix(ps, cfg);
        double worst = 0.0;
        for (std::size_t r = 0; r < got.rows(); ++r)
            for (std::size_t k = 0; k < got.cols(); ++k) worst = std::max(worst, std::abs(got(r, k) - want[r][k]));
        CHECK(worst < 1e-12);
        CHECK(got == reference::build_channel_matrix(ps, cfg));
    }
}

TEST_CASE("channel matrix at a singular delay") {
    // A delay putting one sample exactly on t = T / (2 beta).
    const auto c = small(4, 2);
    PathSet ps{{Path{1.0, c.sample_period() / 1.3, 0.0}}};
    const auto h = build_channel_matrix(ps, c);
    const auto want = oracle::channel_matrix(ps, c);
    for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t k = 0; k < h.cols(); ++k) {
            CHECK(std::isfinite(h(r, k).real()));
            CHECK(std::abs(h(r, k) - want[r][k]) < 1e-12);
        }
}

TEST_CASE("config validation") {
    SystemConfig c;
    CHECK_NOTHROW(c.validate());
    c.subcarriers = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.rolloff = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.bandwidth_hz = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);

    const SystemConfig d;
    PathSet bad{{Path{1.0, 0.0, 2.0 * d.max_doppler_scale()}}};
    CHECK_THROWS_AS(validate_paths(bad, d), InvalidArgument);
    PathSet unsorted{{Path{1.0, 1e-3, 0.0}, Path{1.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(validate_paths(unsorted, d), InvalidArgument);
}

TEST_CASE("dataset generation is deterministic and seed sensitive") {
    const auto c = small(16, 4);
    const auto a = generate_dataset(c, 7, 10);
    const auto b = generate_dataset(c, 7, 10);
    const auto other = generate_dataset(c, 8, 10);
    CHECK(a.realizations == b.realizations);
    CHECK(a.realizations != other.realizations);
    CHECK(a.size() == 10);
    CHECK_THROWS_AS(generate_dataset(c, 7, 0), InvalidArgument);
    // Prefix stability: realization i does not depend on the count.
    const auto longer = generate_dataset(c, 7, 20);
    for (std::size_t i = 0; i < 10; ++i) CHECK(longer.realizations[i] == a.realizations[i]);
}

TEST_CASE("dataset file round-trip and corruption") {
    const auto c = small(16, 4);
    const auto ds = generate_dataset(c, 7, 10);
    const auto path = scratch("ds.uwad");
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    CHECK(back.config == ds.config);
    CHECK(back.seed == 7);
    CHECK(back.realizations == ds.realizations);
    CHECK_NOTHROW(load_dataset(path, c));

    // Byte-identical on re-save.
    const auto path2 = scratch("ds2.uwad");
    save_dataset(back, path2);
    CHECK(io::read_file(path) == io::read_file(path2));

    auto wrong = c;
    wrong.subcarriers = 32;
    CHECK_THROWS_AS(load_dataset(path, wrong), VersionError);

    auto bytes = io::read_file(path);
    // Layout size: header 4 + 4 + config 68 + 4 + 8 + 4, then 24 bytes per path.
    CHECK(bytes.size() == 92 + 10 * c.paths * 24);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    io::write_file_atomic(path2, truncated);
    CHECK_THROWS_AS(load_dataset(path2), FormatError);

    auto version = bytes;
    version[4] = 9;
    io::write_file_atomic(path2, version);
    CHECK_THROWS_AS(load_dataset(path2), VersionError);

    auto magic = bytes;
    magic[0] = 'X';
    io::write_file_atomic(path2, magic);
    CHECK_THROWS_AS(load_dataset(path2), FormatError);

    // A scale outside +-a_max in the first path record.
    auto scale = bytes;
    const double big = 1.0;
    std::memcpy(scale.data() + 92 + 16, &big, 8);
    io::write_file_atomic(path2, scale);
    try {
        load_dataset(path2);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 92);
    }
    CHECK_THROWS_AS(load_dataset(scratch("nope.uwad")), IoError);
}
