#pragma once

// Transmit/receive chain: QPSK mapping, s = F x, AWGN, block LMMSE equalization,
// the identity / DFT baselines, and Monte Carlo BER sweeps.

#include "uwa/channel.hpp"
#include "uwa/numerics.hpp"
#include "uwa/rng.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace uwa {

// Unitarity tolerance enforced on every modulation matrix, ||F^H F - I||_F.
inline constexpr double kUnitarityTolerance = 1e-9;

class ModulationMatrix {
public:
    // Throws InvalidArgument if the matrix is not square or not unitary.
    explicit ModulationMatrix(ComplexMatrix f);

    std::size_t size() const noexcept { return f_.rows(); }
    const ComplexMatrix& matrix() const noexcept { return f_; }

    friend bool operator==(const ModulationMatrix&, const ModulationMatrix&) = default;

private:
    ComplexMatrix f_;
};

ModulationMatrix identity_matrix(std::size_t n);
// Unitary DFT, F_{n,k} = exp(-j 2 pi n k / N) / sqrt(N).
ModulationMatrix dft_matrix(std::size_t n);
// Haar-distributed unitary (QR of a complex Gaussian matrix).
ModulationMatrix random_unitary(std::size_t n, Rng& rng);

// Gray QPSK: (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2). Bits are 0/1 bytes.
std::vector<cplx> qpsk_map(std::span<const std::uint8_t> bits);
// Hard decision by the signs of the real and imaginary parts.
std::vector<std::uint8_t> qpsk_demap(std::span<const cplx> symbols);

std::vector<cplx> modulate(const ModulationMatrix& f, std::span<const cplx> x);

// Adds CN(0, sigma2) to every entry.
void add_awgn(std::span<cplx> v, double sigma2, Rng& rng);

// Block LMMSE with the Cholesky factor of H_e^H H_e + sigma2 I kept for reuse.
class LmmseEqualizer {
public:
    LmmseEqualizer(ComplexMatrix equivalent_channel, double sigma2);

    std::vector<cplx> equalize(std::span<const cplx> received) const;

    const ComplexMatrix& equivalent_channel() const noexcept { return he_; }
    double sigma2() const noexcept { return sigma2_; }

private:
    ComplexMatrix he_;
    double sigma2_;
    Cholesky gram_;
};

// x_hat = (H_e^H H_e + sigma2 I)^{-1} H_e^H r
std::vector<cplx> lmmse_equalize(const ComplexMatrix& he, std::span<const cplx> received, double sigma2);

inline double snr_db_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

struct BitErrors {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
};

// One block through the equivalent channel he = H F: random bits, map, add noise, equalize, count.
BitErrors ber_trial(const LmmseEqualizer& receiver, Rng& rng);

// Convenience form that builds H and H F from the path set.
BitErrors ber_trial(const ModulationMatrix& f, const PathSet& paths, const SystemConfig& config, double sigma2,
                    Rng& rng);

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;

    double ber() const { return bits == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(bits); }
};

// Trial t of realization m at SNR index k draws from Rng::substream(seed, {m, k, t}); runs with the same
// seed are therefore paired across modulation matrices.
std::vector<BerPoint> ber_sweep(const ModulationMatrix& f, const ChannelDataset& dataset,
                                std::span<const double> snr_db, std::size_t trials_per_realization,
                                std::uint64_t seed);

namespace reference {

std::vector<BerPoint> ber_sweep(const ModulationMatrix& f, const ChannelDataset& dataset,
                                std::span<const double> snr_db, std::size_t trials_per_realization,
                                std::uint64_t seed);

}  // namespace reference

// snr_db,trials,bits,bit_errors,ber
void write_ber_csv(std::ostream& out, std::span<const BerPoint> points);
// snr_db<TAB>log10_ber; zero-error points are skipped.
void write_ber_plot_data(std::ostream& out, std::span<const BerPoint> points);

// UWAF: magic, version u32, N u32, then N^2 interleaved (re, im) float64, row-major.
inline constexpr std::uint32_t kModulationFileVersion = 1;

void save_modulation(const ModulationMatrix& f, const std::filesystem::path& path);
// Throws FormatError on malformed content and InvalidArgument if the stored matrix is not unitary.
ModulationMatrix load_modulation(const std::filesystem::path& path);
// Returns the raw stored matrix without the unitarity check.
ComplexMatrix load_modulation_raw(const std::filesystem::path& path);

// CSV with header row,col,re,im and N^2 rows, 17 significant digits.
void write_modulation_csv(std::ostream& out, const ComplexMatrix& f);
ComplexMatrix read_modulation_csv(std::istream& in);

}  // namespace uwa
