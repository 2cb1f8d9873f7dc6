#pragma once

// LMMSE error correlation, per-symbol MSE fairness, and the Siamese loss terms.

#include "uwa/modem.hpp"
#include "uwa/numerics.hpp"

#include <span>
#include <vector>

namespace uwa {

struct MseProfile {
    std::vector<double> e;
    double total = 0.0;
};

// How the fair target is derived from C.
enum class TargetRule {
    EqualShare,     // trace(C) / N per symbol; conserves the total MSE
    InverseTrace,   // 1 / trace(C) per symbol, the literal published form
};

// H^H H + sigma2 I, the modulation-free core of the error correlation.
ComplexMatrix regularized_gram(const ComplexMatrix& h, double sigma2);

// sigma2 (H^H H + sigma2 I)^{-1}, computed once per channel and reused for every F.
ComplexMatrix scaled_core_inverse(const ComplexMatrix& h, double sigma2);

// C_H = sigma2 F^H (H^H H + sigma2 I)^{-1} F.
ComplexMatrix error_correlation(const ComplexMatrix& h, const ComplexMatrix& f, double sigma2);
ComplexMatrix error_correlation(const ComplexMatrix& h, const ModulationMatrix& f, double sigma2);

// Congruence of a precomputed scaled core inverse: F^H K F.
ComplexMatrix error_correlation_from_core(const ComplexMatrix& scaled_core_inv, const ComplexMatrix& f);

// Diagonal of C. Throws NumericalError if a diagonal entry is below -1e-12 or has imaginary residue >= 1e-12.
MseProfile mse_profile(const ComplexMatrix& c);

MseProfile optimal_profile(const ComplexMatrix& c, TargetRule rule = TargetRule::EqualShare);
MseProfile optimal_profile(const MseProfile& e, TargetRule rule = TargetRule::EqualShare);

// ||e - e_opt||^2 / ||e_opt||^2.
double fairness_objective(const MseProfile& e, const MseProfile& e_opt);
double fairness_objective(std::span<const double> e, std::span<const double> e_opt);

// ||F1 - F2||_F^2 / N.
double siamese_distance(const ComplexMatrix& f1, const ComplexMatrix& f2);
double siamese_distance(const ModulationMatrix& f1, const ModulationMatrix& f2);

// (lambda / 2)(f1 + f2) + (1 - lambda) q.
double siamese_loss(double f1, double f2, double q, double lambda);

// max_i |trace C(F_i) - trace C(F_0)| / trace C(F_0). Accepts arbitrary F so non-unitary
// inputs can be used as a negative control.
double trace_invariance_check(const ComplexMatrix& h, double sigma2, std::span<const ComplexMatrix> fs);

}  // namespace uwa
