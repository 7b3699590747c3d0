#include <doctest.h>

#include <cmath>
#include <random>

#include "freeprob/characterizations.hpp"
#include "freeprob/convolution.hpp"
#include "freeprob/families.hpp"
#include "freeprob/transforms.hpp"

using namespace freeprob;

namespace {

std::vector<RegressionSpec> lattice()
{
    std::vector<RegressionSpec> out;
    for (double alpha : {0.3, 0.5, 0.7})
        for (double a : {-0.5, 0.0, 0.5})
            for (double b : {-0.2, 0.0, 0.5}) out.push_back(RegressionSpec::from_alpha(alpha, a, b));
    return out;
}

}  // namespace

TEST_CASE("regression specs are screened")
{
    CHECK_NOTHROW(check_admissible(RegressionSpec::from_alpha(0.5, 0.0, 0.0)));
    CHECK_THROWS_AS(check_admissible(RegressionSpec::from_alpha(1.0, 0.0, 0.0)), InadmissibleError);
    CHECK_THROWS_AS(check_admissible(RegressionSpec::from_alpha(0.0, 0.0, 0.0)), InadmissibleError);
    CHECK_THROWS_AS(check_admissible(RegressionSpec{0.5, 0.6, 0.0, 0.0}), InadmissibleError);
    // b/α ≥ −1 fails for α = 0.9, b = −0.5 (β = 0.1 gives b/β = −5)
    CHECK_THROWS_AS(check_admissible(RegressionSpec::from_alpha(0.9, 0.0, -0.5)), InadmissibleError);
}

TEST_CASE("free regression pipeline")
{
    const auto r = verify_free_laha_lukacs(RegressionSpec::from_alpha(0.5, 0.0, 0.0));
    CHECK(r.pass);
    CHECK(r.residual_sup < 1e-10);
    const auto s = verify_free_laha_lukacs(RegressionSpec::from_alpha(0.3, 0.5, 0.2));
    CHECK(s.pass);
    CHECK(s.residual_sup < 1e-7);
    CHECK(r.residual("first_moment") < 1e-10);
    CHECK(r.residual("conditional_variance") < 1e-10);
}

TEST_CASE("free regression on a parameter lattice")
{
    for (const auto& spec : lattice()) {
        CAPTURE(spec.alpha);
        CAPTURE(spec.a);
        CAPTURE(spec.b);
        const auto r = verify_free_laha_lukacs(spec, default_verification_grid(), 1e-6);
        CHECK(r.pass);
    }
}

TEST_CASE("monotone regression: closed form for the later variable")
{
    const auto half = RegressionSpec::from_alpha(0.5, 0.0, 0.0);
    const auto Y = monotone_Y_measure(half);
    CHECK(std::abs(Y.total_mass() - 1.0) < 1e-5);
    for (Complex z : default_verification_grid()) {
        const Complex s = std::sqrt(z - 2.0) * std::sqrt(z + 2.0);
        const Complex expected = (1.5 * z - 0.5 * s) / (z * z + 0.5);
        CHECK(std::abs(monotone_Y_G_closed_form(half, z) - expected) < 1e-12);
    }

    for (const auto& spec : lattice()) {
        CAPTURE(spec.alpha);
        CAPTURE(spec.a);
        CAPTURE(spec.b);
        const MeixnerParams m{spec.a, spec.b};
        for (Complex z : default_verification_grid()) {
            // L_Y is the β-Boolean power of the Meixner law
            const Complex L = (1.0 - spec.beta) * z + spec.beta / meixner_G(m, z);
            const Complex g = monotone_Y_G_closed_form(spec, z);
            CHECK(std::abs(1.0 / g - L) < 1e-10 * (1.0 + std::abs(L)));
            CHECK(g.imag() <= 0.0);
        }
        const auto r = verify_monotone_laha_lukacs(spec, default_verification_grid(), 1e-6);
        CHECK(r.pass);
    }
}

TEST_CASE("monotone regression pipeline")
{
    const auto r = verify_monotone_laha_lukacs(RegressionSpec::from_alpha(0.5, 0.0, 0.0));
    CHECK(r.pass);
    CHECK(r.residual_sup < 1e-9);
    const auto s = verify_monotone_laha_lukacs(RegressionSpec::from_alpha(0.3, 0.5, 0.2));
    CHECK(s.pass);
    CHECK(s.residual_sup < 1e-7);

    const auto spec = RegressionSpec::from_alpha(0.3, 0.5, 0.2);
    const auto G = monotone_Y_cauchy(spec);
    for (int k = 0; k < 10; ++k) {
        const Complex z(-1.8 + 0.4 * k, 0.6 + 0.1 * k);
        // the first variable is the α-dilated Meixner law, so G_X(L_Y(z)) is the Meixner transform
        const auto X = scaled_meixner_measure(spec.alpha, spec.a, spec.b);
        CHECK(std::abs(cauchy_G(X, 1.0 / G(z)) - meixner_G({spec.a, spec.b}, z)) < 1e-7);
    }

    const auto near_one = RegressionSpec::from_alpha(1e-3, 0.0, 0.0);
    CHECK(ks_distance(monotone_Y_measure(near_one), meixner_measure({0, 0})) < 5e-3);
}

TEST_CASE("Poisson-binomial parameters")
{
    const auto p = thm6_params(0.5, 0.5, 2.0);
    CHECK(std::abs(p.theta - 1.0) < 1e-12);
    CHECK(std::abs(p.alpha - 0.5) < 1e-12);
    CHECK(std::abs(p.sigma - 1.0) < 1e-12);
    CHECK(p.lambda == p.sigma + p.theta);
    CHECK(std::abs(p.c() - 0.5) < 1e-12);
    CHECK(std::abs(p.d() - 0.5) < 1e-12);
    CHECK_THROWS_AS(thm6_params(0.5, 0.25, 2.0), InadmissibleError);
    CHECK_THROWS_AS(thm6_params(0.5, 0.2, 2.0), InadmissibleError);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uc(0.05, 2.0), ue(0.05, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double c = uc(rng), d = c * c + ue(rng);
        const double theta = c * c / (d - c * c);
        const auto q = thm6_params(c, d, std::max(theta, 1.0) + 0.5 + ue(rng));
        CHECK(std::abs(q.c() - c) < 1e-12 * (1.0 + c));
        CHECK(std::abs(q.d() - d) < 1e-12 * (1.0 + d));
    }
}

TEST_CASE("Poisson-binomial characterization")
{
    const auto r = verify_poisson_binomial(thm6_params(0.5, 0.5, 2.0));
    CHECK(r.pass);
    CHECK(r.residual_sup < 1e-5);
    auto value = [&](const std::string& name) {
        for (const auto& [k, v] : r.values)
            if (k == name) return v;
        FAIL("missing value " << name);
        return 0.0;
    };
    // V = W ⊠ binomial, W Marchenko-Pastur with rate 1 and jump 0.5
    CHECK(std::abs(value("tau_V") - 1.0) < 1e-6);
    CHECK(std::abs(value("tau_VU") - 0.5) < 1e-6);
}

TEST_CASE("beta-pair parameters")
{
    CHECK_THROWS_AS(thm7_params(0.5, 2.0, 1.0), InadmissibleError);
    const auto p = thm7_params(0.5, 3.0, 1.0);
    CHECK(std::abs(p.X.sigma - 3.0) < 1e-12);
    CHECK(std::abs(p.X.theta - 2.0) < 1e-12);
    CHECK(std::abs(p.Y.sigma - 5.0) < 1e-12);
    CHECK(std::abs(p.Y.theta - 2.0) < 1e-12);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uc(-0.5, 2.0), ud(-0.5, 4.0), ua(0.1, 2.0);
    int accepted = 0;
    for (int i = 0; i < 400; ++i) {
        const double c = uc(rng), d = ud(rng), a1 = ua(rng);
        const double den = c * d - 1.0;
        if (std::abs(den) < 1e-6) continue;
        const bool positive = (1.0 - c) * d * a1 / den > 0.0 && (c - 1.0) * (d - 1.0) / (1.0 - c * d) > 0.0 &&
                              (1.0 - c) * (d * (a1 + 1.0) - 1.0) / den > 0.0 && c * (1.0 - d) / (1.0 - c * d) > 0.0;
        // a free binomial law also needs σ + θ > 1
        const bool law = positive && (1.0 - c) * d * a1 / den + (c - 1.0) * (d - 1.0) / (1.0 - c * d) > 1.0 &&
                         (1.0 - c) * (d * (a1 + 1.0) - 1.0) / den + c * (1.0 - d) / (1.0 - c * d) > 1.0;
        CAPTURE(c);
        CAPTURE(d);
        CAPTURE(a1);
        if (law) {
            CHECK_NOTHROW(thm7_params(c, d, a1));
            ++accepted;
        } else {
            CHECK_THROWS_AS(thm7_params(c, d, a1), InadmissibleError);
        }
    }
    CHECK(accepted > 0);
}

TEST_CASE("beta-pair characterization")
{
    const auto fp = solve_thm7_alpha1(0.5, 3.0);
    CHECK(fp.step < 1e-8);
    CHECK(std::abs(thm7_psi_at_one(0.5, 3.0, fp.alpha1) - fp.alpha1) < 1e-8);
    const auto r = verify_beta_characterization(0.5, 3.0, fp.alpha1);
    CHECK(r.pass);
    CHECK(r.residual_sup < 1e-5);
    CHECK(r.residual("S_product") < 1e-6);
    CHECK_THROWS_AS(verify_beta_characterization(0.5, 2.0, 1.0), InadmissibleError);
}

TEST_CASE("scalar identities")
{
    const auto l0 = lemma1_sides(0, 0.7, Complex(0.3, 0.2));
    CHECK(std::abs(l0.lhs - l0.rhs) < 1e-15);
    const auto l1 = lemma1_sides(1, 2.0, 0.25);
    CHECK(std::abs(l1.lhs - 2.0) < 1e-15);
    CHECK(std::abs(l1.rhs - 2.0) < 1e-15);
    CHECK_THROWS_AS(lemma1_sides(2, 2.0, 0.5), DomainError);
    for (int n = 0; n <= 6; ++n) CHECK(lemma1_identity_check(n, 1000, 9 + n) < 1e-12);

    const auto p0 = psi_tr2_sides(0.0, Complex(0.4, 1.0));
    CHECK(std::abs(p0.lhs) < 1e-15);
    CHECK(std::abs(p0.rhs) < 1e-15);
    CHECK_THROWS_AS(psi_tr2_sides(0.5, 2.0), DomainError);
    const auto p3 = psi_tr2_sides(0.5, 3.0);
    CHECK(std::abs(p3.lhs + 6.0) < 1e-14);
    CHECK(std::abs(p3.rhs + 6.0) < 1e-14);
    CHECK(psi_tr2_identity_check(1000, 4) < 1e-12);
}
