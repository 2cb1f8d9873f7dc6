#include "uwa/modem.hpp"

#include "uwa/binary_io.hpp"
#include "uwa/error.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace uwa {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::vector<std::uint8_t> random_bits(std::size_t count, Rng& rng) {
    std::vector<std::uint8_t> bits(count);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 64 == 0) word = rng.next_u64();
        bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
    }
    return bits;
}

std::uint64_t count_bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::uint64_t errors = 0;
    for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] != b[i]) ? 1u : 0u;
    return errors;
}

}  // namespace

ModulationMatrix::ModulationMatrix(ComplexMatrix f) : f_(std::move(f)) {
    if (f_.empty() || !f_.square()) throw InvalidArgument("ModulationMatrix: matrix must be square");
    const double residual = unitarity_residual(f_);
    if (!(residual < kUnitarityTolerance)) {
        std::ostringstream msg;
        msg << "ModulationMatrix: not unitary, ||F^H F - I||_F = " << residual;
        throw InvalidArgument(msg.str());
    }
}

ModulationMatrix identity_matrix(std::size_t n) {
    if (n < 2) throw InvalidArgument("identity_matrix: N must be >= 2");
    return ModulationMatrix(ComplexMatrix::identity(n));
}

ModulationMatrix dft_matrix(std::size_t n) {
    if (n < 2) throw InvalidArgument("dft_matrix: N must be >= 2");
    ComplexMatrix f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k) {
            // Reduce n k mod N first so the angle stays small.
            const auto idx = static_cast<double>((r * k) % n);
            f(r, k) = std::polar(scale, -2.0 * std::numbers::pi * idx / static_cast<double>(n));
        }
    return ModulationMatrix(std::move(f));
}

ModulationMatrix random_unitary(std::size_t n, Rng& rng) {
    ComplexMatrix g(n, n);
    for (auto& z : g.data()) z = rng.complex_normal(1.0);
    return ModulationMatrix(householder_qr(g).q);
}

std::vector<cplx> qpsk_map(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) throw InvalidArgument("qpsk_map: bit count must be even");
    std::vector<cplx> out(bits.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (bits[2 * k] > 1 || bits[2 * k + 1] > 1) throw InvalidArgument("qpsk_map: bits must be 0 or 1");
        const double re = bits[2 * k] ? -1.0 : 1.0;
        const double im = bits[2 * k + 1] ? -1.0 : 1.0;
        out[k] = {re * kInvSqrt2, im * kInvSqrt2};
    }
    return out;
}

std::vector<std::uint8_t> qpsk_demap(std::span<const cplx> symbols) {
    std::vector<std::uint8_t> bits(2 * symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        bits[2 * k] = symbols[k].real() < 0.0 ? 1 : 0;
        bits[2 * k + 1] = symbols[k].imag() < 0.0 ? 1 : 0;
    }
    return bits;
}

std::vector<cplx> modulate(const ModulationMatrix& f, std::span<const cplx> x) {
    if (x.size() != f.size()) throw InvalidArgument("modulate: symbol vector length differs from N");
    return matvec(f.matrix(), x);
}

void add_awgn(std::span<cplx> v, double sigma2, Rng& rng) {
    if (sigma2 < 0.0) throw InvalidArgument("add_awgn: sigma2 must be >= 0");
    if (sigma2 == 0.0) return;
    for (auto& z : v) z += rng.complex_normal(sigma2);
}

namespace {

ComplexMatrix regularized_gram_of(const ComplexMatrix& he, double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("lmmse: sigma2 must be > 0");
    ComplexMatrix g = adjoint_matmul(he, he);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += sigma2;
    return g;
}

}  // namespace

LmmseEqualizer::LmmseEqualizer(ComplexMatrix equivalent_channel, double sigma2)
    : he_(std::move(equivalent_channel)),
      sigma2_(sigma2),
      gram_(regularized_gram_of(he_, sigma2)) {}

std::vector<cplx> LmmseEqualizer::equalize(std::span<const cplx> received) const {
    if (received.size() != he_.rows()) throw InvalidArgument("lmmse_equalize: received length differs from H_e rows");
    std::vector<cplx> x = adjoint_matvec(he_, received);
    gram_.solve_in_place(x);
    return x;
}

std::vector<cplx> lmmse_equalize(const ComplexMatrix& he, std::span<const cplx> received, double sigma2) {
    return LmmseEqualizer(he, sigma2).equalize(received);
}

BitErrors ber_trial(const LmmseEqualizer& receiver, Rng& rng) {
    const auto& he = receiver.equivalent_channel();
    const auto bits = random_bits(2 * he.cols(), rng);
    const auto x = qpsk_map(bits);
    auto r = matvec(he, x);
    add_awgn(r, receiver.sigma2(), rng);
    const auto decided = qpsk_demap(receiver.equalize(r));
    return {count_bit_errors(bits, decided), bits.size()};
}

BitErrors ber_trial(const ModulationMatrix& f, const PathSet& paths, const SystemConfig& config, double sigma2,
                    Rng& rng) {
    const ComplexMatrix h = build_channel_matrix(paths, config);
    if (h.cols() != f.size()) throw InvalidArgument("ber_trial: modulation size differs from channel");
    const auto bits = random_bits(2 * f.size(), rng);
    const auto x = qpsk_map(bits);
    auto r = matvec(h, modulate(f, x));
    add_awgn(r, sigma2, rng);
    const auto decided = qpsk_demap(lmmse_equalize(matmul(h, f.matrix()), r, sigma2));
    return {count_bit_errors(bits, decided), bits.size()};
}

namespace {

void check_sweep_inputs(const ModulationMatrix& f, const ChannelDataset& ds) {
    if (ds.realizations.empty()) throw InvalidArgument("ber_sweep: empty dataset");
    if (f.size() != ds.config.subcarriers) throw InvalidArgument("ber_sweep: modulation size differs from dataset N");
}

// Errors for every (snr, trial) of realization m.
std::vector<BitErrors> sweep_realization(const ModulationMatrix& f, const ChannelDataset& ds, std::size_t m,
                                         std::span<const double> snr_db, std::size_t trials, std::uint64_t seed) {
    const ComplexMatrix he = matmul(ds.channel(m), f.matrix());
    std::vector<BitErrors> out(snr_db.size());
    for (std::size_t k = 0; k < snr_db.size(); ++k) {
        const LmmseEqualizer receiver(he, snr_db_to_sigma2(snr_db[k]));
        for (std::size_t t = 0; t < trials; ++t) {
            Rng rng = Rng::substream(seed, {m, k, t});
            const auto e = ber_trial(receiver, rng);
            out[k].errors += e.errors;
            out[k].bits += e.bits;
        }
    }
    return out;
}

std::vector<BerPoint> collect(std::span<const double> snr_db, std::size_t trials, std::size_t realizations,
                              const std::vector<std::vector<BitErrors>>& per_realization) {
    std::vector<BerPoint> points(snr_db.size());
    for (std::size_t k = 0; k < snr_db.size(); ++k) {
        points[k].snr_db = snr_db[k];
        points[k].trials = trials * realizations;
        for (const auto& r : per_realization) {
            points[k].bits += r[k].bits;
            points[k].bit_errors += r[k].errors;
        }
    }
    return points;
}

}  // namespace

std::vector<BerPoint> ber_sweep(const ModulationMatrix& f, const ChannelDataset& ds, std::span<const double> snr_db,
                                std::size_t trials, std::uint64_t seed) {
    check_sweep_inputs(f, ds);
    std::vector<std::vector<BitErrors>> per(ds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t m = 0; m < ds.size(); ++m) per[m] = sweep_realization(f, ds, m, snr_db, trials, seed);
    return collect(snr_db, trials, ds.size(), per);
}

namespace reference {

std::vector<BerPoint> ber_sweep(const ModulationMatrix& f, const ChannelDataset& ds, std::span<const double> snr_db,
                                std::size_t trials, std::uint64_t seed) {
    check_sweep_inputs(f, ds);
    std::vector<std::vector<BitErrors>> per(ds.size());
    for (std::size_t m = 0; m < ds.size(); ++m) per[m] = sweep_realization(f, ds, m, snr_db, trials, seed);
    return collect(snr_db, trials, ds.size(), per);
}

}  // namespace reference

void write_ber_csv(std::ostream& out, std::span<const BerPoint> points) {
    out << "snr_db,trials,bits,bit_errors,ber\n";
    char buf[64];
    for (const auto& p : points) {
        out << p.snr_db << ',' << p.trials << ',' << p.bits << ',' << p.bit_errors << ',';
        auto res = std::to_chars(buf, buf + sizeof buf, p.ber(), std::chars_format::scientific, 10);
        out.write(buf, res.ptr - buf);
        out << '\n';
    }
}

void write_ber_plot_data(std::ostream& out, std::span<const BerPoint> points) {
    out << "snr_db\tlog10_ber\n";
    for (const auto& p : points) {
        if (p.bit_errors == 0) continue;
        out << p.snr_db << '\t' << std::log10(p.ber()) << '\n';
    }
}

void save_modulation(const ModulationMatrix& f, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("UWAF");
    w.u32(kModulationFileVersion);
    w.u32(static_cast<std::uint32_t>(f.size()));
    for (const auto& z : f.matrix().data()) {
        w.f64(z.real());
        w.f64(z.imag());
    }
    io::write_file_atomic(path, w.bytes());
}

ComplexMatrix load_modulation_raw(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path));
    r.expect_magic("UWAF");
    const auto version = r.u32("version");
    if (version != kModulationFileVersion) {
        throw VersionError("modulation file " + path.string() + ": unsupported version " + std::to_string(version));
    }
    const std::uint64_t n_offset = r.offset();
    const auto n = r.u32("N");
    if (n == 0) throw FormatError("N must be >= 1", n_offset);
    const std::uint64_t expected = std::uint64_t{n} * n * 16;
    if (r.remaining() != expected) {
        throw FormatError("payload holds " + std::to_string(r.remaining()) + " bytes, N implies " +
                              std::to_string(expected),
                          r.offset());
    }
    std::vector<cplx> entries(std::size_t{n} * n);
    for (auto& z : entries) {
        const std::uint64_t at = r.offset();
        const double re = r.f64("re");
        const double im = r.f64("im");
        if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("non-finite entry", at);
        z = {re, im};
    }
    return ComplexMatrix(n, n, std::move(entries));
}

ModulationMatrix load_modulation(const std::filesystem::path& path) { return ModulationMatrix(load_modulation_raw(path)); }

void write_modulation_csv(std::ostream& out, const ComplexMatrix& f) {
    out << "row,col,re,im\n";
    char buf[64];
    auto put = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
        out.write(buf, res.ptr - buf);
    };
    for (std::size_t r = 0; r < f.rows(); ++r)
        for (std::size_t c = 0; c < f.cols(); ++c) {
            out << r << ',' << c << ',';
            put(f(r, c).real());
            out << ',';
            put(f(r, c).imag());
            out << '\n';
        }
}

ComplexMatrix read_modulation_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "row,col,re,im") throw FormatError("missing CSV header", 0);
    struct Entry {
        std::size_t r, c;
        cplx z;
    };
    std::vector<Entry> entries;
    std::size_t n = 0;
    std::uint64_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            offset += 1;
            continue;
        }
        std::size_t r = 0, c = 0;
        double re = 0, im = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto field = [&](auto& value) {
            auto res = std::from_chars(p, end, value);
            if (res.ec != std::errc()) throw FormatError("bad CSV field", offset + (p - line.data()));
            p = res.ptr;
            if (p < end && *p == ',') ++p;
        };
        field(r);
        field(c);
        field(re);
        field(im);
        if (p != end) throw FormatError("unexpected trailing characters in CSV row", offset + (p - line.data()));
        entries.push_back({r, c, {re, im}});
        n = std::max({n, r + 1, c + 1});
        offset += line.size() + 1;
    }
    if (n == 0 || entries.size() != n * n) throw FormatError("CSV does not describe a square matrix", offset);
    ComplexMatrix f(n, n);
    std::vector<bool> seen(n * n, false);
    for (const auto& e : entries) {
        if (seen[e.r * n + e.c]) throw FormatError("duplicate CSV entry", offset);
        seen[e.r * n + e.c] = true;
        f(e.r, e.c) = e.z;
    }
    return f;
}

}  // namespace uwa
