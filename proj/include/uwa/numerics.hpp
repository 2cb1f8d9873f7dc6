#pragma once

// Dense complex linear algebra used throughout the library.
//
// Everything here is double precision. Matrices are small (N <= a few hundred)
// and dense, so the kernels are plain loops with OpenMP over rows; the serial
// versions in `reference` are kept as the ground truth for tests and benches.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace uwa {

using cplx = std::complex<double>;

class ComplexMatrix {
public:
    ComplexMatrix() = default;

    // Zero-filled rows x cols matrix.
    ComplexMatrix(std::size_t rows, std::size_t cols);

    // Takes row-major entries. Rejects empty shapes, size mismatch and non-finite values.
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const cplx> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<cplx> column(std::size_t c) const;

    ComplexMatrix adjoint() const;

    ComplexMatrix& operator+=(const ComplexMatrix& other);
    ComplexMatrix& operator-=(const ComplexMatrix& other);
    ComplexMatrix& operator*=(cplx s);

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(cplx s, ComplexMatrix a);

// A * B. Throws InvalidArgument on dimension mismatch.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// A^H * B without forming A^H.
ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// A * x.
std::vector<cplx> matvec(const ComplexMatrix& a, std::span<const cplx> x);

// A^H * x.
std::vector<cplx> adjoint_matvec(const ComplexMatrix& a, std::span<const cplx> x);

// Lower Cholesky factor of a Hermitian positive-definite matrix, M = L L^H.
// Only the lower triangle of M is read.
class Cholesky {
public:
    explicit Cholesky(const ComplexMatrix& m);

    std::size_t size() const noexcept { return factor_.rows(); }
    const ComplexMatrix& factor() const noexcept { return factor_; }

    ComplexMatrix solve(const ComplexMatrix& b) const;
    std::vector<cplx> solve(std::span<const cplx> b) const;
    void solve_in_place(std::span<cplx> b) const;

    // M^{-1}, Hermitian.
    ComplexMatrix inverse() const;

private:
    ComplexMatrix factor_;
};

// X with M X = B for Hermitian positive-definite M.
// Throws NumericalError on a non-positive pivot.
ComplexMatrix hermitian_solve(const ComplexMatrix& m, const ComplexMatrix& b);

struct QrFactors {
    ComplexMatrix q;
    ComplexMatrix r;
};

// Pivot magnitude below which householder_qr reports rank deficiency.
inline constexpr double kRankTolerance = 1e-13;

// Householder QR of a square matrix with R's diagonal made real and positive,
// which makes the factorization unique. Throws NumericalError when a pivot
// falls below kRankTolerance.
QrFactors householder_qr(const ComplexMatrix& a);

// Solves X R^H = B for X, R upper triangular (the QR backward needs B R^{-H}).
ComplexMatrix solve_right_upper_adjoint(const ComplexMatrix& r, const ComplexMatrix& b);

double frob_norm(const ComplexMatrix& a);
double frob_norm_sq(const ComplexMatrix& a);
double norm2(std::span<const cplx> v);

// ||A^H A - I||_F.
double unitarity_residual(const ComplexMatrix& a);

// max |(A^H A - I)_{ij}|.
double unitarity_max_error(const ComplexMatrix& a);

// Real part of the trace of a square matrix.
double trace_real(const ComplexMatrix& a);

namespace reference {

// Serial triple loops; used to cross-check the parallel kernels.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace reference

}  // namespace uwa
