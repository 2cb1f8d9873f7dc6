#include "doctest.h"
#include "oracles.hpp"

#include "uwa/error.hpp"
#include "uwa/modem.hpp"
#include "uwa/objective.hpp"

#include <cmath>

using namespace uwa;

namespace {

ComplexMatrix stacked_identity(std::size_t n, std::size_t guard) {
    ComplexMatrix h(n + guard, n);
    for (std::size_t i = 0; i < n; ++i) h(i, i) = 1.0;
    return h;
}

}  // namespace

TEST_CASE("error correlation closed forms") {
    const double s2 = 0.2;
    const auto c = error_correlation(stacked_identity(4, 2), identity_matrix(4), s2);
    CHECK(frob_norm(c - (s2 / (1 + s2)) * ComplexMatrix::identity(4)) < 1e-15);

    ComplexMatrix h(3, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 2.0;
    const auto d = error_correlation(h, identity_matrix(2), 1.0);
    CHECK(std::abs(d(0, 0) - 0.5) < 1e-15);
    CHECK(std::abs(d(1, 1) - 0.2) < 1e-15);
    CHECK(std::abs(d(0, 1)) < 1e-15);
}

TEST_CASE("both forms of the error correlation agree") {
    // C = sigma2 F^H (H^H H + sigma2 I)^{-1} F and C = sigma2 (H_e^H H_e + sigma2 I)^{-1} with H_e = H F.
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        const auto h = oracle::random_matrix(8, 6, rng);
        const auto f = random_unitary(6, rng);
        const double s2 = 0.05 + rng.uniform();
        const auto he = oracle::multiply(oracle::to_mat(h), oracle::to_mat(f.matrix()));
        auto m = oracle::multiply(oracle::adjoint(he), he);
        for (std::size_t i = 0; i < 6; ++i) m[i][i] += s2;
        auto want = oracle::inverse(m);
        for (auto& row : want)
            for (auto& z : row) z *= s2;
        CHECK(oracle::rel_frob_error(error_correlation(h, f, s2), want) < 1e-10);
    }
}

TEST_CASE("mse profile") {
    ComplexMatrix c = ComplexMatrix::identity(4);
    c *= 0.3;
    auto p = mse_profile(c);
    CHECK(p.e == std::vector<double>(4, 0.3));
    CHECK(p.total == doctest::Approx(1.2).epsilon(1e-15));

    const std::vector<cplx> d{0.5, 0.2};
    p = mse_profile(ComplexMatrix::diagonal(d));
    CHECK(p.e == std::vector<double>{0.5, 0.2});
    CHECK(p.total == doctest::Approx(0.7).epsilon(1e-15));

    Rng rng(22);
    const auto a = oracle::random_matrix(5, 5, rng);
    const auto pd = adjoint_matmul(a, a);
    double tr = 0.0;
    for (std::size_t i = 0; i < 5; ++i) tr += pd(i, i).real();
    CHECK(std::abs(mse_profile(pd).total - tr) < 1e-12 * tr);

    const std::vector<cplx> neg{0.5, -0.1};
    CHECK_THROWS_AS(mse_profile(ComplexMatrix::diagonal(neg)), NumericalError);
    const std::vector<cplx> imag{0.5, cplx(0.1, 1e-6)};
    CHECK_THROWS_AS(mse_profile(ComplexMatrix::diagonal(imag)), NumericalError);
}

TEST_CASE("fair target") {
    ComplexMatrix c = ComplexMatrix::identity(4);
    c *= 0.3;
    CHECK(optimal_profile(c).e == std::vector<double>(4, 0.3));
    const std::vector<cplx> d{0.5, 0.2};
    const auto t = optimal_profile(ComplexMatrix::diagonal(d));
    CHECK(t.e[0] == doctest::Approx(0.35).epsilon(1e-15));
    CHECK(t.e[1] == doctest::Approx(0.35).epsilon(1e-15));

    Rng rng(23);
    const auto a = oracle::random_matrix(6, 6, rng);
    const auto pd = adjoint_matmul(a, a);
    const auto tp = optimal_profile(pd);
    double sum = 0.0;
    for (double v : tp.e) sum += v;
    CHECK(std::abs(sum - mse_profile(pd).total) < 1e-12 * sum);

    const auto inv = optimal_profile(ComplexMatrix::diagonal(d), TargetRule::InverseTrace);
    CHECK(inv.e[0] == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
}

TEST_CASE("fairness objective") {
    const std::vector<double> a{0.3, 0.3};
    CHECK(fairness_objective(a, a) == 0.0);
    const std::vector<double> e{0.4, 0.2};
    CHECK(fairness_objective(e, a) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    const std::vector<double> es{4.0, 2.0}, as{3.0, 3.0};
    CHECK(fairness_objective(es, as) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(fairness_objective(e, zero), InvalidArgument);
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(fairness_objective(e, three), InvalidArgument);
}

TEST_CASE("siamese distance") {
    Rng rng(24);
    const auto f = random_unitary(5, rng);
    CHECK(siamese_distance(f, f) == 0.0);
    ComplexMatrix neg = f.matrix();
    neg *= -1.0;
    CHECK(siamese_distance(f.matrix(), neg) == doctest::Approx(4.0).epsilon(1e-14));
    // I - DFT_2 = [[1 - r, -r], [-r, 1 + r]] with r = 1/sqrt(2).
    const double r = 1.0 / std::sqrt(2.0);
    const double hand = ((1.0 - r) * (1.0 - r) + 2.0 * r * r + (1.0 + r) * (1.0 + r)) / 2.0;
    CHECK(hand == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(siamese_distance(identity_matrix(2), dft_matrix(2)) == doctest::Approx(hand).epsilon(1e-14));
}

TEST_CASE("siamese loss") {
    CHECK(siamese_loss(0, 0, 0, 0.005) == 0.0);
    CHECK(siamese_loss(0.4, 0.6, 123.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(siamese_loss(2, 2, 1, 0.005) == doctest::Approx(1.005).epsilon(1e-14));
    CHECK_THROWS_AS(siamese_loss(1, 1, 1, -0.1), InvalidArgument);
    CHECK_THROWS_AS(siamese_loss(1, 1, 1, 1.5), InvalidArgument);
}

TEST_CASE("trace invariance") {
    Rng rng(25);
    std::vector<ComplexMatrix> fs{identity_matrix(8).matrix(), dft_matrix(8).matrix(),
                                  random_unitary(8, rng).matrix()};
    const auto h = oracle::random_matrix(10, 8, rng);
    CHECK(trace_invariance_check(h, 0.1, fs) < 1e-10);
    CHECK(trace_invariance_check(h, 0.1, std::span(fs).first(1)) == 0.0);

    ComplexMatrix half = ComplexMatrix::identity(8);
    half *= 0.5;
    fs.push_back(half);
    // 0.5 I scales the trace by 1/4.
    CHECK(trace_invariance_check(h, 0.1, fs) == doctest::Approx(0.75).epsilon(1e-10));
}
