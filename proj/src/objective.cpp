#include "uwa/objective.hpp"

#include "uwa/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uwa {

ComplexMatrix regularized_gram(const ComplexMatrix& h, double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("regularized_gram: sigma2 must be > 0");
    ComplexMatrix g = adjoint_matmul(h, h);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += sigma2;
    return g;
}

ComplexMatrix scaled_core_inverse(const ComplexMatrix& h, double sigma2) {
    ComplexMatrix inv = Cholesky(regularized_gram(h, sigma2)).inverse();
    inv *= sigma2;
    return inv;
}

ComplexMatrix error_correlation_from_core(const ComplexMatrix& scaled_core_inv, const ComplexMatrix& f) {
    if (scaled_core_inv.rows() != f.rows()) throw InvalidArgument("error_correlation: dimension mismatch");
    return adjoint_matmul(f, matmul(scaled_core_inv, f));
}

ComplexMatrix error_correlation(const ComplexMatrix& h, const ComplexMatrix& f, double sigma2) {
    if (h.cols() != f.rows()) throw InvalidArgument("error_correlation: H columns differ from F rows");
    return error_correlation_from_core(scaled_core_inverse(h, sigma2), f);
}

ComplexMatrix error_correlation(const ComplexMatrix& h, const ModulationMatrix& f, double sigma2) {
    return error_correlation(h, f.matrix(), sigma2);
}

MseProfile mse_profile(const ComplexMatrix& c) {
    if (!c.square()) throw InvalidArgument("mse_profile: matrix must be square");
    MseProfile p;
    p.e.resize(c.rows());
    for (std::size_t k = 0; k < c.rows(); ++k) {
        const cplx d = c(k, k);
        if (d.real() < -1e-12) {
            throw NumericalError("mse_profile: negative diagonal " + std::to_string(d.real()) + " at " +
                                 std::to_string(k));
        }
        if (std::abs(d.imag()) >= 1e-12) {
            throw NumericalError("mse_profile: diagonal has imaginary residue at " + std::to_string(k));
        }
        p.e[k] = d.real();
        p.total += d.real();
    }
    return p;
}

MseProfile optimal_profile(const MseProfile& e, TargetRule rule) {
    const auto n = static_cast<double>(e.e.size());
    const double level = rule == TargetRule::EqualShare ? e.total / n : 1.0 / e.total;
    return {std::vector<double>(e.e.size(), level), level * n};
}

MseProfile optimal_profile(const ComplexMatrix& c, TargetRule rule) { return optimal_profile(mse_profile(c), rule); }

double fairness_objective(std::span<const double> e, std::span<const double> e_opt) {
    if (e.size() != e_opt.size()) throw InvalidArgument("fairness_objective: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const double d = e[k] - e_opt[k];
        num += d * d;
        den += e_opt[k] * e_opt[k];
    }
    if (!(den > 0.0)) throw InvalidArgument("fairness_objective: target profile has zero norm");
    return num / den;
}

double fairness_objective(const MseProfile& e, const MseProfile& e_opt) { return fairness_objective(e.e, e_opt.e); }

double siamese_distance(const ComplexMatrix& f1, const ComplexMatrix& f2) {
    if (f1.rows() != f2.rows() || f1.cols() != f2.cols()) throw InvalidArgument("siamese_distance: size mismatch");
    double s = 0.0;
    const auto a = f1.data();
    const auto b = f2.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return s / static_cast<double>(f1.rows());
}

double siamese_distance(const ModulationMatrix& f1, const ModulationMatrix& f2) {
    return siamese_distance(f1.matrix(), f2.matrix());
}

double siamese_loss(double f1, double f2, double q, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("siamese_loss: lambda must lie in [0, 1]");
    return 0.5 * lambda * (f1 + f2) + (1.0 - lambda) * q;
}

double trace_invariance_check(const ComplexMatrix& h, double sigma2, std::span<const ComplexMatrix> fs) {
    if (fs.empty()) return 0.0;
    const ComplexMatrix core = scaled_core_inverse(h, sigma2);
    const double t0 = trace_real(error_correlation_from_core(core, fs[0]));
    double worst = 0.0;
    for (std::size_t i = 1; i < fs.size(); ++i) {
        const double t = trace_real(error_correlation_from_core(core, fs[i]));
        worst = std::max(worst, std::abs(t - t0) / t0);
    }
    return worst;
}

}  // namespace uwa
