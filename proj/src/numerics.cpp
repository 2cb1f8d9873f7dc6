#include "uwa/numerics.hpp"

#include "uwa/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uwa {

namespace {

// Below this many complex multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = 1u << 15;

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
    }
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {
    if (rows == 0 || cols == 0) {
        throw InvalidArgument("ComplexMatrix: rows and cols must be >= 1");
    }
}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) {
        throw InvalidArgument("ComplexMatrix: rows and cols must be >= 1");
    }
    if (data_.size() != rows * cols) {
        throw InvalidArgument("ComplexMatrix: expected " + std::to_string(rows * cols) + " entries, got " +
                              std::to_string(data_.size()));
    }
    for (const auto& z : data_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw InvalidArgument("ComplexMatrix: non-finite entry");
        }
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> diag) {
    ComplexMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

std::vector<cplx> ComplexMatrix::column(std::size_t c) const {
    std::vector<cplx> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) {
        throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                              std::to_string(b.rows()) + ")");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    ComplexMatrix c(m, n);
    const bool parallel = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < m; ++i) {
        cplx* ci = &c(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const cplx aip = a(i, p);
            const cplx* bp = &b(p, 0);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows()) {
        throw InvalidArgument("adjoint_matmul: row counts differ (" + std::to_string(a.rows()) + " vs " +
                              std::to_string(b.rows()) + ")");
    }
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    ComplexMatrix c(m, n);
    const bool parallel = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < m; ++i) {
        cplx* ci = &c(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const cplx api = std::conj(a(p, i));
            const cplx* bp = &b(p, 0);
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
    return c;
}

std::vector<cplx> matvec(const ComplexMatrix& a, std::span<const cplx> x) {
    if (a.cols() != x.size()) throw InvalidArgument("matvec: dimension mismatch");
    std::vector<cplx> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        cplx acc = 0.0;
        const auto row = a.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

std::vector<cplx> adjoint_matvec(const ComplexMatrix& a, std::span<const cplx> x) {
    if (a.rows() != x.size()) throw InvalidArgument("adjoint_matvec: dimension mismatch");
    std::vector<cplx> y(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) y[j] += std::conj(row[j]) * x[i];
    }
    return y;
}

Cholesky::Cholesky(const ComplexMatrix& m) : factor_(m.rows(), m.cols()) {
    if (!m.square()) throw InvalidArgument("Cholesky: matrix must be square");
    const std::size_t n = m.rows();
    auto& l = factor_;
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j).real();
        for (std::size_t p = 0; p < j; ++p) d -= std::norm(l(j, p));
        if (!(d > 0.0)) {
            throw NumericalError("Cholesky: non-positive pivot " + std::to_string(d) + " at column " +
                                 std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = m(i, j);
            const cplx* li = &l(i, 0);
            const cplx* lj = &l(j, 0);
            for (std::size_t p = 0; p < j; ++p) s -= li[p] * std::conj(lj[p]);
            l(i, j) = s / ljj;
        }
    }
}

void Cholesky::solve_in_place(std::span<cplx> b) const {
    const std::size_t n = size();
    if (b.size() != n) throw InvalidArgument("Cholesky::solve: dimension mismatch");
    const auto& l = factor_;
    for (std::size_t i = 0; i < n; ++i) {
        cplx s = b[i];
        for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * b[p];
        b[i] = s / l(i, i).real();
    }
    for (std::size_t i = n; i-- > 0;) {
        cplx s = b[i];
        for (std::size_t p = i + 1; p < n; ++p) s -= std::conj(l(p, i)) * b[p];
        b[i] = s / l(i, i).real();
    }
}

std::vector<cplx> Cholesky::solve(std::span<const cplx> b) const {
    std::vector<cplx> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
}

ComplexMatrix Cholesky::solve(const ComplexMatrix& b) const {
    if (b.rows() != size()) throw InvalidArgument("Cholesky::solve: dimension mismatch");
    const std::size_t n = size(), k = b.cols();
    ComplexMatrix x(n, k);
    const bool parallel = n * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<cplx> col(n);
        for (std::size_t r = 0; r < n; ++r) col[r] = b(r, c);
        solve_in_place(col);
        for (std::size_t r = 0; r < n; ++r) x(r, c) = col[r];
    }
    return x;
}

ComplexMatrix Cholesky::inverse() const {
    ComplexMatrix inv = solve(ComplexMatrix::identity(size()));
    // Symmetrize so downstream quadratic forms see an exactly Hermitian matrix.
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        inv(i, i) = inv(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx avg = 0.5 * (inv(i, j) + std::conj(inv(j, i)));
            inv(i, j) = avg;
            inv(j, i) = std::conj(avg);
        }
    }
    return inv;
}

ComplexMatrix hermitian_solve(const ComplexMatrix& m, const ComplexMatrix& b) { return Cholesky(m).solve(b); }

QrFactors householder_qr(const ComplexMatrix& a) {
    if (!a.square()) throw InvalidArgument("householder_qr: matrix must be square");
    const std::size_t n = a.rows();
    ComplexMatrix r = a;
    // Reflector k acts on rows k..n-1; store unit vectors for the Q accumulation.
    std::vector<std::vector<cplx>> reflectors(n);
    std::vector<cplx> w(n);

    for (std::size_t k = 0; k < n; ++k) {
        double xnorm_sq = 0.0;
        for (std::size_t i = k; i < n; ++i) xnorm_sq += std::norm(r(i, k));
        const double xnorm = std::sqrt(xnorm_sq);
        if (xnorm < kRankTolerance) {
            throw NumericalError("householder_qr: rank-deficient input (pivot " + std::to_string(xnorm) +
                                 " at column " + std::to_string(k) + ")");
        }
        const cplx x0 = r(k, k);
        const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx(1.0);
        const cplx alpha = -phase * xnorm;

        auto& v = reflectors[k];
        v.assign(n - k, 0.0);
        for (std::size_t i = k; i < n; ++i) v[i - k] = r(i, k);
        v[0] -= alpha;
        double vnorm_sq = 0.0;
        for (const auto& z : v) vnorm_sq += std::norm(z);
        const double vnorm = std::sqrt(vnorm_sq);
        for (auto& z : v) z /= vnorm;

        // R[k:, k:] -= 2 v (v^H R[k:, k:])
        std::fill(w.begin(), w.end(), cplx(0.0));
        for (std::size_t i = k; i < n; ++i) {
            const cplx vi = std::conj(v[i - k]);
            for (std::size_t j = k; j < n; ++j) w[j] += vi * r(i, j);
        }
        for (std::size_t i = k; i < n; ++i) {
            const cplx vi = 2.0 * v[i - k];
            for (std::size_t j = k; j < n; ++j) r(i, j) -= vi * w[j];
        }
        r(k, k) = alpha;
        for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
    }

    // Q = H_0 H_1 ... H_{n-1}, applied right to left onto the identity.
    ComplexMatrix q = ComplexMatrix::identity(n);
    for (std::size_t k = n; k-- > 0;) {
        const auto& v = reflectors[k];
        std::fill(w.begin(), w.end(), cplx(0.0));
        for (std::size_t i = k; i < n; ++i) {
            const cplx vi = std::conj(v[i - k]);
            for (std::size_t j = k; j < n; ++j) w[j] += vi * q(i, j);
        }
        for (std::size_t i = k; i < n; ++i) {
            const cplx vi = 2.0 * v[i - k];
            for (std::size_t j = k; j < n; ++j) q(i, j) -= vi * w[j];
        }
    }

    // Rotate each diagonal entry of R onto the positive real axis.
    for (std::size_t k = 0; k < n; ++k) {
        const double mag = std::abs(r(k, k));
        const cplx d = r(k, k) / mag;
        const cplx dc = std::conj(d);
        for (std::size_t j = k; j < n; ++j) r(k, j) *= dc;
        r(k, k) = mag;
        for (std::size_t i = 0; i < n; ++i) q(i, k) *= d;
    }
    return {std::move(q), std::move(r)};
}

ComplexMatrix solve_right_upper_adjoint(const ComplexMatrix& r, const ComplexMatrix& b) {
    // X R^H = B  <=>  R X^H = B^H; back substitution column by column of X^H.
    if (!r.square() || b.cols() != r.rows()) throw InvalidArgument("solve_right_upper_adjoint: dimension mismatch");
    const std::size_t n = r.rows();
    ComplexMatrix x(b.rows(), n);
    for (std::size_t row = 0; row < b.rows(); ++row) {
        // y = X[row, :]^H solves R y = B[row, :]^H
        std::vector<cplx> y(n);
        for (std::size_t i = n; i-- > 0;) {
            cplx s = std::conj(b(row, i));
            for (std::size_t p = i + 1; p < n; ++p) s -= r(i, p) * y[p];
            y[i] = s / r(i, i);
        }
        for (std::size_t i = 0; i < n; ++i) x(row, i) = std::conj(y[i]);
    }
    return x;
}

double frob_norm_sq(const ComplexMatrix& a) {
    double s = 0.0;
    for (const auto& z : a.data()) s += std::norm(z);
    return s;
}

double frob_norm(const ComplexMatrix& a) { return std::sqrt(frob_norm_sq(a)); }

double norm2(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

double unitarity_residual(const ComplexMatrix& a) {
    ComplexMatrix g = adjoint_matmul(a, a);
    for (std::size_t i = 0; i < g.rows() && i < g.cols(); ++i) g(i, i) -= 1.0;
    return frob_norm(g);
}

double unitarity_max_error(const ComplexMatrix& a) {
    ComplexMatrix g = adjoint_matmul(a, a);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
            worst = std::max(worst, std::abs(g(i, j) - (i == j ? cplx(1.0) : cplx(0.0))));
    return worst;
}

double trace_real(const ComplexMatrix& a) {
    if (!a.square()) throw InvalidArgument("trace: matrix must be square");
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i).real();
    return t;
}

namespace reference {

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw InvalidArgument("reference::matmul: inner dimensions differ");
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            cplx s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
            c(i, j) = s;
        }
    return c;
}

ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows()) throw InvalidArgument("reference::adjoint_matmul: row counts differ");
    ComplexMatrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            cplx s = 0.0;
            for (std::size_t p = 0; p < a.rows(); ++p) s += std::conj(a(p, i)) * b(p, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace reference

}  // namespace uwa
