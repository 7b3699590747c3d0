#include <doctest.h>

#include <cmath>
#include <random>

#include "freeprob/convolution.hpp"
#include "freeprob/families.hpp"
#include "freeprob/transforms.hpp"

using namespace freeprob;

namespace {

const Complex I{0.0, 1.0};

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

    SpectralMeasure law()
    {
        switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0: return meixner_measure({uniform(-1.0, 1.0), uniform(-0.5, 1.0)}, 600);
        case 1: return mp_measure({uniform(1.2, 3.0), uniform(0.3, 1.5)}, 600);
        case 2: return binomial_measure({uniform(1.2, 3.0), uniform(0.5, 2.0)}, 600);
        default: {
            std::vector<Atom> atoms;
            const int n = std::uniform_int_distribution<int>(1, 4)(rng);
            double left = 1.0;
            for (int i = 0; i < n; ++i) {
                const double m = i + 1 == n ? left : left * uniform(0.2, 0.7);
                atoms.push_back({uniform(-2.0, 2.0) + 5.0 * i, m});
                left -= m;
            }
            return SpectralMeasure(atoms);
        }
        }
    }

    /// Continuous family law, for operations whose result is recovered on a grid.
    SpectralMeasure smooth_law()
    {
        const auto m = std::uniform_int_distribution<int>(0, 1)(rng) == 0
                           ? meixner_measure({uniform(-1.0, 1.0), uniform(-0.3, 1.0)}, 600)
                           : mp_measure({uniform(1.5, 3.0), uniform(0.3, 1.5)}, 600);
        return shift(dilate(m, uniform(0.5, 1.5)), uniform(-1.0, 1.0));
    }

    Complex upper() { return {uniform(-4.0, 4.0), uniform(0.05, 3.0)}; }
};

}  // namespace

TEST_CASE("Cauchy transforms are Nevanlinna functions")
{
    Gen g(1);
    for (int i = 0; i < 30; ++i) {
        const auto m = g.law();
        for (int k = 0; k < 20; ++k) {
            const Complex z = g.upper();
            const Complex v = cauchy_G(m, z);
            CHECK(v.imag() <= 0.0);
            CHECK(std::abs(v) <= 1.0 / z.imag() * (1.0 + 1e-9));
            CHECK(reciprocal_L(m, z).imag() >= z.imag() * (1.0 - 1e-9));
        }
        const Complex far(0.3, 1e4);
        CHECK(std::abs(far * cauchy_G(m, far) - 1.0) < 1e-3);
    }
}

TEST_CASE("moments and free cumulants determine each other")
{
    Gen g(2);
    for (int i = 0; i < 30; ++i) {
        const auto m = g.law();
        std::vector<double> mm;
        for (int k = 1; k <= 6; ++k) mm.push_back(moment(m, k));
        const auto k = free_cumulants(mm, 6);
        const auto back = moments_from_free_cumulants(k, 6);
        for (int j = 0; j < 6; ++j) CHECK(std::abs(back[j] - mm[j]) < 1e-9 * (1.0 + std::abs(mm[j])));
        CHECK(std::abs(k[0] - mean(m)) < 1e-12 * (1.0 + std::abs(mean(m))));
        CHECK(std::abs(k[1] - variance(m)) < 1e-9 * (1.0 + variance(m)));
    }
}

TEST_CASE("invert_L is a right inverse of L on the cone")
{
    Gen g(3);
    for (int i = 0; i < 20; ++i) {
        const auto m = g.law();
        const double scale = 1.0 + std::max(std::abs(m.hull_lo()), std::abs(m.hull_hi()));
        for (int k = 0; k < 5; ++k) {
            const Complex w(g.uniform(-1.0, 1.0) * scale, g.uniform(4.0, 8.0) * scale);
            const Complex z = invert_L(m, w);
            CHECK(std::abs(reciprocal_L(m, z) - w) < 1e-10 * std::abs(w));
        }
    }
}

TEST_CASE("chi inverts psi on positive laws")
{
    Gen g(4);
    for (int i = 0; i < 20; ++i) {
        const auto m = std::uniform_int_distribution<int>(0, 1)(g.rng) == 0
                           ? mp_measure({g.uniform(0.3, 3.0), g.uniform(0.3, 1.5)}, 600)
                           : binomial_measure({g.uniform(0.3, 3.0), g.uniform(0.5, 2.0)}, 600);
        const double zero = m.mass_at(0.0, 1e-12).value_or(0.0);
        for (int k = 0; k < 5; ++k) {
            const double w = (zero - 1.0) * g.uniform(0.05, 0.95);
            const Complex z = chi_inverse(m, w);
            CHECK(std::abs(psi_transform(m, z) - w) < 1e-10);
        }
    }
}

TEST_CASE("free addition: commutativity and additive statistics")
{
    Gen g(5);
    for (int i = 0; i < 6; ++i) {
        const auto mu = g.smooth_law();
        const auto nu = g.smooth_law();
        const auto a = free_add(mu, nu);
        const auto b = free_add(nu, mu);
        CHECK(ks_distance(a.law, b.law) < 1e-6);
        CHECK(std::abs(mean(a.law) - mean(mu) - mean(nu)) < 1e-5);
        CHECK(std::abs(variance(a.law) - variance(mu) - variance(nu)) < 1e-5);
        for (int k = 0; k < 5; ++k) {
            const Complex z = g.upper();
            CHECK(std::abs(a.cauchy(z) - b.cauchy(z)) < 1e-9);
            CHECK(a.subordination.omega1(z).imag() >= z.imag() - 1e-12);
        }
        const Complex w(g.uniform(-1.0, 1.0), 20.0);
        CHECK(std::abs(voiculescu_phi(a.cauchy, w) - voiculescu_phi(mu, w) - voiculescu_phi(nu, w)) < 1e-7);
    }
}

TEST_CASE("monotone convolution composes reciprocal Cauchy transforms")
{
    Gen g(6);
    for (int i = 0; i < 10; ++i) {
        const auto mu = g.law();
        const auto nu = g.law();
        const auto rho = g.law();
        AnalyticFunctionHandle gm = cauchy_handle(mu);
        for (int k = 0; k < 20; ++k) {
            const Complex z = g.upper();
            const Complex lhs = 1.0 / cauchy_G(mu, reciprocal_L(nu, reciprocal_L(rho, z)));
            const Complex rhs = reciprocal_L(mu, reciprocal_L(nu, reciprocal_L(rho, z)));
            CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(rhs)));
        }
    }
    for (int i = 0; i < 4; ++i) {
        const auto mu = g.smooth_law();
        const auto nu = g.smooth_law();
        const auto r = monotone_add(mu, nu);
        CHECK(std::abs(r.law.total_mass() - 1.0) < 1e-6);
        CHECK(std::abs(mean(r.law) - mean(mu) - mean(nu)) < 1e-5);
        for (int k = 0; k < 10; ++k) {
            const Complex z = g.upper();
            CHECK(std::abs(r.cauchy(z) - cauchy_G(mu, reciprocal_L(nu, z))) < 1e-12 / z.imag());
        }
    }
}

TEST_CASE("Boolean powers interpolate reciprocal Cauchy transforms")
{
    Gen g(7);
    for (int i = 0; i < 5; ++i) {
        const auto mu = g.smooth_law();
        const double t = g.uniform(0.1, 1.0);
        const auto r = boolean_power(mu, t);
        CHECK(std::abs(r.law.total_mass() - 1.0) < 1e-6);
        CHECK(std::abs(mean(r.law) - t * mean(mu)) < 1e-5);
        for (int k = 0; k < 10; ++k) {
            const Complex z = g.upper();
            const Complex L = (1.0 - t) * z + t * reciprocal_L(mu, z);
            CHECK(std::abs(1.0 / r.cauchy(z) - L) < 1e-12 * (1.0 + std::abs(L)));
        }
    }
}

TEST_CASE("free multiplication: S-transforms multiply and means multiply")
{
    Gen g(8);
    for (int i = 0; i < 5; ++i) {
        const MarchenkoPasturParams pm{g.uniform(1.2, 3.0), g.uniform(0.3, 1.5)};
        const FreeBinomialParams pb{g.uniform(1.2, 3.0), g.uniform(0.5, 2.0)};
        const auto mu = mp_measure(pm, 600);
        const auto nu = binomial_measure(pb, 600);
        const auto r = free_mult_transforms(mu, nu);
        CHECK(r.s_residual < 1e-6);
        CHECK(r.psi_residual < 1e-6);
        CHECK(std::abs(r.mean - mean(mu) * mean(nu)) < 1e-9);
        for (double w : default_s_grid()) {
            const Complex expected = mp_S(pm, w) * binomial_S(pb, w);
            CHECK(std::abs(s_transform(r.psi, w, r.mass_at_zero, r.mean) - expected) < 1e-6);
        }
        const auto swapped = free_mult_transforms(nu, mu);
        for (double t : {0.1, 0.7, 2.0}) CHECK(std::abs(swapped.psi(-t) - r.psi(-t)) < 1e-6);
    }
}
