#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "freeprob/families.hpp"
#include "freeprob/inversion.hpp"
#include "freeprob/transforms.hpp"

using namespace freeprob;

namespace {

const Complex I{0.0, 1.0};

// κ_n by brute force over non-crossing partitions of {0..n−1}: m_n = Σ_π Π_{B∈π} κ_|B|, solved for κ_n.
// Partitions are enumerated by restricted growth strings and filtered for crossings.
std::vector<double> cumulants_by_partitions(const std::vector<double>& m, int n)
{
    std::vector<double> k(n + 1, 0.0);
    for (int len = 1; len <= n; ++len) {
        double rest = 0.0;
        std::vector<int> a(len, 0);
        std::function<void(int, int)> rec = [&](int i, int maxb) {
            if (i == len) {
                for (int p = 0; p < len; ++p)
                    for (int q = p + 1; q < len; ++q)
                        for (int r = q + 1; r < len; ++r)
                            for (int s = r + 1; s < len; ++s)
                                if (a[p] == a[r] && a[q] == a[s] && a[p] != a[q]) return;
                std::vector<int> size(len, 0);
                int blocks = 0;
                for (int v : a) blocks = std::max(blocks, v + 1), ++size[v];
                if (blocks == 1) return;
                double prod = 1.0;
                for (int bl = 0; bl < blocks; ++bl) prod *= k[size[bl]];
                rest += prod;
                return;
            }
            for (int v = 0; v <= maxb + 1; ++v) {
                a[i] = v;
                rec(i + 1, std::max(maxb, v));
            }
        };
        a[0] = 0;
        rec(1, 0);
        k[len] = m[len - 1] - rest;
    }
    return {k.begin() + 1, k.end()};
}

}  // namespace

TEST_CASE("Cauchy transform and its reciprocal on point masses")
{
    const auto d0 = SpectralMeasure::point_mass(0.0);
    CHECK(std::abs(cauchy_G(d0, I) + I) < 1e-15);
    CHECK(std::abs(reciprocal_L(d0, I) - I) < 1e-15);
    const auto dc = SpectralMeasure::point_mass(1.5);
    const Complex z(0.3, 0.7);
    CHECK(std::abs(reciprocal_L(dc, z) - (z - 1.5)) < 1e-14);
    CHECK(std::abs(invert_L(dc, Complex(0.2, 2.0)) - Complex(1.7, 2.0)) < 1e-12);
    CHECK(std::abs(voiculescu_phi(dc, Complex(0.0, 3.0)) - 1.5) < 1e-12);
    CHECK(std::abs(r_transform(dc, Complex(0.1, 0.05)) - 1.5) < 1e-12);
}

TEST_CASE("gridded Meixner G matches the closed form")
{
    for (double a : {-1.0, 0.0, 1.0})
        for (double b : {-0.5, 0.0, 1.0}) {
            const auto m = meixner_measure({a, b});
            for (double y : {0.5, 1.0, 2.0})
                for (double x = -2.0; x <= 2.0; x += 1.0) {
                    const Complex z(x, y);
                    CHECK(std::abs(cauchy_G(m, z) - meixner_G({a, b}, z)) < 1e-6);
                }
        }
    const auto sc = meixner_measure({0, 0});
    CHECK(std::abs(reciprocal_L(sc, 2.0 * I) - 1.0 / (I * (1.0 - std::sqrt(2.0)))) < 1e-9);
}

TEST_CASE("branch rule holds for every Cauchy handle")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(-4.0, 4.0), uy(1e-3, 3.0);
    const std::vector<SpectralMeasure> laws{meixner_measure({1, -0.5}), mp_measure({0.5, 1}),
                                            binomial_measure({0.5, 2})};
    for (const auto& m : laws) {
        const auto h = cauchy_handle(m);
        for (int i = 0; i < 200; ++i) CHECK(h(Complex(ux(rng), uy(rng))).imag() <= 0.0);
    }
}

TEST_CASE("inverse of L and the Voiculescu transform")
{
    const auto sc = meixner_measure({0, 0});
    const Complex z = invert_L(sc, 5.0 * I);
    CHECK(std::abs(reciprocal_L(sc, z) - 5.0 * I) < 1e-12);
    CHECK(z.imag() > 0.0);
    const Complex w(0.0, 50.0);
    CHECK(std::abs(w * voiculescu_phi(sc, w) - 1.0) < 1e-3);
    CHECK(std::abs(r_transform(sc, Complex(0.01, 0.0)) - 0.01) < 1e-3);

    const auto m = mp_measure({2.0, 0.5});
    for (Complex t : {Complex(0.5, 3.0), Complex(-2.0, 4.0), Complex(0.0, 10.0)}) {
        const Complex zz = invert_L(m, t);
        CHECK(std::abs(reciprocal_L(m, zz) - t) < 1e-11);
    }
}

TEST_CASE("free cumulants agree with the non-crossing partition sum")
{
    const std::vector<double> sc{0, 1, 0, 2, 0, 5};
    const auto k = free_cumulants(sc, 6);
    const auto oracle = cumulants_by_partitions(sc, 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(std::abs(k[i] - oracle[i]) < 1e-12);
        CHECK(std::abs(k[i] - (i == 1 ? 1.0 : 0.0)) < 1e-12);
    }
    const double c = 0.7;
    std::vector<double> dm;
    for (int i = 1; i <= 5; ++i) dm.push_back(std::pow(c, i));
    const auto kd = free_cumulants(dm, 5);
    CHECK(std::abs(kd[0] - c) < 1e-14);
    for (int i = 1; i < 5; ++i) CHECK(std::abs(kd[i]) < 1e-13);

    const MeixnerParams p{0.5, 0.3};
    const auto m = meixner_measure(p);
    std::vector<double> mm;
    for (int i = 1; i <= 6; ++i) mm.push_back(moment(m, i));
    const auto km = free_cumulants(mm, 6);
    const auto ko = cumulants_by_partitions(mm, 6);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(km[i] - ko[i]) < 1e-9);
    CHECK(std::abs(km[2] - p.a) < 1e-6);
    CHECK(std::abs(km[3] - (p.a * p.a + p.b)) < 1e-6);

    const auto back = moments_from_free_cumulants(km, 6);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(back[i] - mm[i]) < 1e-10 * (1.0 + std::abs(mm[i])));
}

TEST_CASE("R-transform Taylor coefficients are the free cumulants")
{
    const MeixnerParams p{0.5, 0.3};
    const auto k = r_transform_cumulants(meixner_measure(p), 4);
    CHECK(std::abs(k[0]) < 1e-6);
    CHECK(std::abs(k[1] - 1.0) < 1e-6);
    CHECK(std::abs(k[2] - p.a) < 1e-5);
    CHECK(std::abs(k[3] - (p.a * p.a + p.b)) < 1e-5);
}

TEST_CASE("psi, chi and S on simple laws")
{
    const auto d0 = SpectralMeasure::point_mass(0.0);
    const auto d1 = SpectralMeasure::point_mass(1.0);
    const Complex z(-0.4, 0.3);
    CHECK(std::abs(psi_transform(d0, z)) < 1e-15);
    CHECK(std::abs(psi_transform(d1, z) - z / (1.0 - z)) < 1e-14);
    for (double w : {-0.45, -0.2, -0.05}) {
        CHECK(std::abs(chi_inverse(d1, w) - w / (1.0 + w)) < 1e-12);
        CHECK(std::abs(s_transform(d1, w) - 1.0) < 1e-12);
    }
    CHECK_THROWS(s_transform(d0, Complex(-0.2, 0.0)));
}

TEST_CASE("psi by quadrature agrees with the Cauchy transform path")
{
    const std::vector<SpectralMeasure> laws{mp_measure({1, 1}), mp_measure({0.5, 1}), binomial_measure({1, 1}),
                                            binomial_measure({0.5, 2}), meixner_measure({1, 0})};
    for (const auto& m : laws) {
        const auto G = cauchy_handle(m);
        for (double t : {0.1, 0.3, 0.6, 0.9}) {
            const Complex zz(-t, 0.0);
            CHECK(std::abs(psi_transform(m, zz) - psi_from_cauchy(G, zz)) < 1e-10);
        }
    }
    const auto mp = mp_measure({1, 1});
    CHECK(std::abs(psi_transform(mp, -1.0) - psi_from_cauchy(cauchy_handle(mp), -1.0)) < 1e-8);
}

TEST_CASE("chi inverts psi and S matches closed forms")
{
    const auto mp = mp_measure({1, 1});
    const auto bn = binomial_measure({1, 1});
    for (int i = 0; i < 20; ++i) {
        const double w = -0.5 + 0.49 * i / 19.0;
        CHECK(std::abs(psi_transform(mp, chi_inverse(mp, w)) - w) < 1e-12);
        CHECK(std::abs(s_transform(mp, w) - 1.0 / (1.0 + w)) < 1e-6);
        CHECK(std::abs(s_transform(bn, w) - (1.0 + 1.0 / (1.0 + w))) < 1e-6);
    }
    const MarchenkoPasturParams p{2.0, 0.5};
    const auto m = mp_measure(p);
    for (double w = -0.45; w < 0.0; w += 0.05) CHECK(std::abs(s_transform(m, w) - mp_S(p, w)) < 1e-6);
}

TEST_CASE("Stieltjes inversion of exact transforms")
{
    AnalyticFunctionHandle inv_z([](Complex z) { return 1.0 / z; }, Domain::upper_half_plane(), HandleKind::Cauchy,
                                 [](Complex z) { return -1.0 / (z * z); });
    CHECK(std::abs(atom_mass_at(inv_z, 0.0, default_eps_ladder(inv_z)) - 1.0) < 1e-6);
    const auto d = stieltjes_invert(inv_z, chebyshev_grid(-1.0, 1.0, 200).nodes);
    CHECK(std::abs(d.total_mass() - 1.0) < 1e-6);
    REQUIRE(d.atoms().size() == 1);
    CHECK(std::abs(d.atoms()[0].location) < 1e-9);

    const auto G = meixner_cauchy_handle({0, 0});
    const auto sc = stieltjes_invert(G, chebyshev_grid(-2.0, 2.0, 2000).nodes);
    REQUIRE(sc.ac());
    double err = 0.0;
    for (std::size_t i = 0; i < sc.ac()->nodes.size(); ++i) {
        const double x = sc.ac()->nodes[i];
        err = std::max(err, std::abs(sc.ac()->values[i] - std::sqrt(std::max(0.0, 4.0 - x * x)) / (2.0 * M_PI)));
    }
    CHECK(err < 1e-4);
    CHECK(std::abs(atom_mass_at(G, 0.0, default_eps_ladder(G))) < 1e-4);

    const auto mpG = cauchy_handle(mp_measure({0.5, 1}));
    CHECK(std::abs(atom_mass_at(mpG, 0.0, default_eps_ladder(mpG)) - 0.5) < 1e-4);
}
