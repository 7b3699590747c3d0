#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "freeprob/families.hpp"
#include "freeprob/matrix_oracle.hpp"

using namespace freeprob;

namespace {

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MatrixEnsembleConfig small(int N, int trials, std::uint64_t seed = 7)
{
    MatrixEnsembleConfig c;
    c.N = N;
    c.trials = trials;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("Haar unitaries are unitary")
{
    auto rng = trial_rng(1, 0);
    const auto U = haar_unitary(60, rng);
    const Eigen::MatrixXcd E = U.adjoint() * U - Eigen::MatrixXcd::Identity(60, 60);
    CHECK(E.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("per-trial streams are reproducible and distinct")
{
    auto a = trial_rng(5, 3), b = trial_rng(5, 3), c = trial_rng(5, 4);
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    CHECK(x != z);
}

TEST_CASE("sampled matrices")
{
    auto rng = trial_rng(2, 0);
    const auto M = sample_matrix(SpectralMeasure::point_mass(1.5), 40, rng);
    CHECK((M - 1.5 * Eigen::MatrixXcd::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);

    const auto m = mp_measure({2.0, 0.5});
    const int N = 300;
    int good = 0;
    for (int t = 0; t < 20; ++t) {
        auto r = trial_rng(9, t);
        const auto spec = sample_spectrum(m, N, r, true);
        if (ks_distance_to_sample(m, spec) < 3.0 / std::sqrt(N)) ++good;
        auto r2 = trial_rng(9, t);
        const auto A = sample_matrix(m, N, r2, true);
        CHECK(std::abs(A.trace().real() / N - mean(m)) < 5.0 / std::sqrt(N));
    }
    CHECK(good >= 18);

    auto rq = trial_rng(9, 0);
    CHECK(ks_distance_to_sample(m, sample_spectrum(m, N, rq)) < 1.0 / N + 1e-9);
}

TEST_CASE("configuration is checked")
{
    CHECK_THROWS_AS(check_config(small(1, 1)), DomainError);
    CHECK_THROWS_AS(check_config(small(100, 0)), DomainError);
    CHECK_NOTHROW(check_config(small(100, 1)));
}

TEST_CASE("free addition of matrices")
{
    const auto d = empirical_free_add(SpectralMeasure::point_mass(1.0), SpectralMeasure::point_mass(-0.25),
                                      small(50, 2));
    CHECK(d.ks_distance < 1e-9);

    const auto sc = meixner_measure({0, 0});
    const auto r = empirical_free_add(sc, sc, small(300, 2));
    CHECK(r.ks_distance < 0.05);
    const auto mp = mp_measure({1.0, 1.0});
    CHECK(empirical_free_add(mp, mp, small(300, 2)).ks_distance < 0.05);
}

TEST_CASE("KS distance shrinks with N")
{
    const auto sc = meixner_measure({0, 0});
    const auto m = meixner_measure({1.0, 0.0});
    std::vector<double> lo, hi;
    for (std::uint64_t s = 0; s < 10; ++s) {
        lo.push_back(empirical_free_add(sc, m, small(60, 1, s)).ks_distance);
        hi.push_back(empirical_free_add(sc, m, small(240, 1, s)).ks_distance);
    }
    CHECK(median(hi) < median(lo));
}

TEST_CASE("conditional regression")
{
    auto cfg = small(200, 2);
    const auto r = conditional_regression_check(RegressionSpec::from_alpha(0.5, 0.0, 0.0), cfg);
    CHECK(r.regression_residual < 0.05);
    CHECK(r.control_residual > 3.0 * r.regression_residual);
    REQUIRE(r.variance_coefficients.size() == 3);
    CHECK(std::abs(r.variance_coefficients[2] - r.predicted_variance_coefficients[2]) < 0.1);

    auto big = small(600, 2);
    const auto r2 = conditional_regression_check(RegressionSpec::from_alpha(0.5, 0.0, 0.0), big);
    CHECK(r2.regression_residual < r.regression_residual);

    cfg.projection_degree = 12;
    const auto hi_deg = conditional_regression_check(RegressionSpec::from_alpha(0.3, 0.5, 0.2), cfg);
    CHECK(hi_deg.degree_used <= 12);
    CHECK(hi_deg.regression_residual < 0.05);
}

TEST_CASE("free multiplication of matrices")
{
    const auto nu = binomial_measure({1.0, 1.0});
    const auto id = empirical_free_mult(SpectralMeasure::point_mass(1.0), nu, small(200, 1));
    CHECK(id.ks_distance < 1.0 / 200 + 1e-9);

    const auto r = empirical_free_mult(mp_measure({1.0, 1.0}), nu, small(300, 2));
    CHECK(r.ks_distance < 0.05);
    CHECK(r.mean_error < 5.0 / std::sqrt(300.0));
}

TEST_CASE("Householder conjugation has the Haar law")
{
    auto rng = trial_rng(4, 0);
    std::vector<double> d{-2.0, -0.5, 0.0, 0.3, 1.0, 1.0, 2.5, 4.0};
    const int N = static_cast<int>(d.size());
    const auto B = haar_conjugate(d, rng);
    CHECK((B - B.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(B);
    std::vector<double> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < N; ++i) CHECK(std::abs(es.eigenvalues()[i] - sorted[i]) < 1e-12);

    const int n = 20, samples = 4000;
    std::vector<double> spec(n);
    for (int i = 0; i < n; ++i) spec[i] = std::pow(-1.0, i) * i / 4.0;
    double m = 0.0, v = 0.0;
    for (double x : spec) m += x / n;
    for (double x : spec) v += (x - m) * (x - m) / n;
    double s1 = 0.0, q1 = 0.0, sn = 0.0, qn = 0.0;
    for (int t = 0; t < samples; ++t) {
        const auto A = haar_conjugate(spec, rng);
        const double a = A(0, 0).real(), b = A(n - 1, n - 1).real();
        s1 += a;
        q1 += a * a;
        sn += b;
        qn += b * b;
    }
    s1 /= samples;
    sn /= samples;
    const double var1 = q1 / samples - s1 * s1, varn = qn / samples - sn * sn;
    CHECK(std::abs(s1 - m) < 0.05);
    CHECK(std::abs(sn - m) < 0.05);
    // a diagonal entry of a Haar conjugate has variance var(d)/(N+1)
    CHECK(std::abs(var1 / (v / (n + 1)) - 1.0) < 0.1);
    CHECK(std::abs(varn / (v / (n + 1)) - 1.0) < 0.1);
}
