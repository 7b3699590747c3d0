#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "freeprob/characterizations.hpp"
#include "freeprob/convolution.hpp"
#include "freeprob/families.hpp"
#include "freeprob/inversion.hpp"
#include "freeprob/matrix_oracle.hpp"
#include "freeprob/transforms.hpp"

using namespace freeprob;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;

    void require(bool ok, const std::string& what, double value, const char* rel, double bound)
    {
        if (!ok) pass = false;
        note << ' ' << what << '=' << value << (ok ? "" : "!") << rel << bound;
    }
    void below(const std::string& what, double value, double bound) { require(value < bound, what, value, "<", bound); }
    void above(const std::string& what, double value, double bound) { require(value > bound, what, value, ">", bound); }
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    o.note.precision(3);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.note << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("%s %2d %-28s %6.2fs/%gs%s%s\n", ok ? "PASS" : "FAIL", id, name, secs, budget_s,
                in_time ? "" : " (over budget)", o.note.str().c_str());
    std::fflush(stdout);
}

template <class F>
double sup(const std::vector<Complex>& zs, F f)
{
    double m = 0.0;
    for (Complex z : zs) m = std::max(m, f(z));
    return m;
}

std::vector<RegressionSpec> lattice()
{
    std::vector<RegressionSpec> out;
    for (double alpha : {0.3, 0.5, 0.7})
        for (double a : {-0.5, 0.0, 0.5})
            for (double b : {-0.2, 0.0, 0.5}) out.push_back(RegressionSpec::from_alpha(alpha, a, b));
    return out;
}

std::vector<double> open_w_grid()
{
    std::vector<double> w;
    for (int i = 0; i <= 40; ++i) w.push_back(-0.45 + 0.4 * i / 40.0);
    return w;
}

}  // namespace

int main()
{
    const auto grid = default_verification_grid();

    criterion(1, "Meixner family sanity", 5.0, [](Outcome& o) {
        double mass = 0.0, mu = 0.0, var = 0.0;
        for (double a : {-1.0, 0.0, 1.0})
            for (double b : {-0.5, 0.0, 1.0}) {
                const auto m = meixner_measure({a, b});
                mass = std::max(mass, std::abs(m.total_mass() - 1.0));
                mu = std::max(mu, std::abs(mean(m)));
                var = std::max(var, std::abs(variance(m) - 1.0));
            }
        o.below("mass_err", mass, 1e-6);
        o.below("mean_err", mu, 1e-6);
        o.below("var_err", var, 1e-6);
    });

    criterion(2, "Meixner quadratic equation", 1.0, [](Outcome& o) {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> ux(-5.0, 5.0), uy(1e-3, 5.0);
        double res = 0.0;
        for (double a : {-1.0, 0.0, 1.0})
            for (double b : {-0.5, 0.0, 1.0})
                for (int i = 0; i < 100; ++i) {
                    const Complex z(ux(rng), uy(rng));
                    const Complex G = meixner_G({a, b}, z);
                    res = std::max(res, std::abs((1.0 + z * a + b * z * z) * G * G - (z + a + 2.0 * b * z) * G + 1.0 + b));
                }
        o.below("residual", res, 1e-12);
    });

    criterion(3, "subordination of free sums", 5.0, [&](Outcome& o) {
        const auto mu = meixner_measure({0.5, 0.2});
        const auto nu = meixner_measure({0.0, 0.0});
        const auto r = free_add(mu, nu);
        const auto& w1 = r.subordination.omega1;
        o.below("G_sum-G_mu(w1)", sup(grid, [&](Complex z) { return std::abs(cauchy_G(r.law, z) - cauchy_G(mu, w1(z))); }),
                1e-8);
        double gain = 1e300;
        for (Complex z : grid) gain = std::min(gain, w1(z).imag() - z.imag());
        o.require(gain >= 0.0, "min_Im_gain", gain, ">=", 0.0);
        const Complex far(0.0, 1e3);
        o.below("|w1(iy)/iy-1|", std::abs(w1(far) / far - 1.0), 0.01);
    });

    criterion(4, "subordination of a self sum", 5.0, [&](Outcome& o) {
        const auto mu = meixner_measure({0.0, 0.0});
        const auto nu = free_add_power(mu, 1.0).law;
        const auto r = free_add(mu, nu);
        o.below("w1-(L/2+z/2)", sup(grid, [&](Complex z) {
                    return std::abs(r.subordination.omega1(z) - (0.5 * reciprocal_L(r.law, z) + 0.5 * z));
                }), 1e-8);
    });

    criterion(5, "free regression report", 10.0, [](Outcome& o) {
        const auto r = verify_free_laha_lukacs(RegressionSpec::from_alpha(0.3, 0.5, 0.2));
        o.below("first_moment", r.residual("first_moment"), 1e-7);
        o.below("conditional_variance", r.residual("conditional_variance"), 1e-7);
        o.below("meixner_law", r.residual("meixner_law"), 1e-7);
    });

    criterion(6, "monotone regression report", 10.0, [](Outcome& o) {
        double comp = 0.0, recip = 0.0, ks = 0.0;
        for (const auto& spec : lattice()) {
            const auto r = verify_monotone_laha_lukacs(spec);
            comp = std::max(comp, r.residual("composition"));
            recip = std::max(recip, r.residual("reciprocal_Y"));
            ks = std::max(ks, r.residual("boolean_power_ks"));
        }
        o.below("G_X(L_Y)-G_ab", comp, 1e-7);
        o.below("L_Y-boolean", recip, 1e-9);
        o.below("KS(Y,boolean_power)", ks, 1e-3);
    });

    criterion(7, "S-transforms", 10.0, [](Outcome& o) {
        const auto v = mp_measure({1.0, 1.0});
        const auto u = binomial_measure({1.0, 1.0});
        double ev = 0.0, eu = 0.0, ep = 0.0;
        const auto W = free_mult_transforms(v, u);
        for (double w : open_w_grid()) {
            const Complex sv = s_transform(v, w), su = s_transform(u, w);
            ev = std::max(ev, std::abs(sv - 1.0 / (1.0 + w)));
            eu = std::max(eu, std::abs(su - (1.0 + 1.0 / (1.0 + w))));
            ep = std::max(ep, std::abs(s_transform(W.psi, w, W.mass_at_zero, W.mean) - sv * su));
        }
        o.below("S_MP", ev, 1e-6);
        o.below("S_binomial", eu, 1e-6);
        o.below("S_W-S_V*S_U", ep, 1e-6);
    });

    criterion(8, "Poisson-binomial report", 15.0, [](Outcome& o) {
        const auto p = thm6_params(0.5, 0.5, 2.0);
        o.below("param_err", std::abs(p.sigma - 1.0) + std::abs(p.theta - 1.0) + std::abs(p.alpha - 0.5), 1e-12);
        const auto r = verify_poisson_binomial(p);
        o.below("S_W", r.residual("S_W"), 1e-5);
        o.below("c_moment", r.residual("c_moment"), 1e-5);
        o.below("d_moment", r.residual("d_moment"), 1e-5);
    });

    criterion(9, "beta-pair report", 15.0, [](Outcome& o) {
        const auto fp = solve_thm7_alpha1(0.5, 3.0);
        o.below("alpha1_step", fp.step, 1e-8);
        const auto r = verify_beta_characterization(0.5, 3.0, fp.alpha1);
        for (const char* k : {"S_XY", "S_X", "S_Y", "S_product"}) o.below(k, r.residual(k), 1e-5);
    });

    criterion(10, "scalar identities", 1.0, [](Outcome& o) {
        double l = 0.0;
        for (int n = 0; n <= 8; ++n) l = std::max(l, lemma1_identity_check(n, 1000, 100 + n));
        o.below("lemma", l, 1e-12);
        o.below("psi_shift", psi_tr2_identity_check(1000, 7), 1e-12);
    });

    criterion(11, "matrix oracle", 60.0, [](Outcome& o) {
        MatrixEnsembleConfig cfg;
        cfg.N = 1000;
        cfg.trials = 25;
        cfg.seed = 7;
        const auto sc = meixner_measure({0.0, 0.0});
        o.below("KS", empirical_free_add(sc, sc, cfg).ks_distance, 0.05);
        const auto r = conditional_regression_check(RegressionSpec::from_alpha(0.5, 0.0, 0.0), cfg);
        o.below("regression", r.regression_residual, 0.05);
        o.above("control", r.control_residual, 3.0 * r.regression_residual);
    });

    criterion(12, "Stieltjes round trip", 20.0, [](Outcome& o) {
        std::vector<SpectralMeasure> laws;
        for (double a : {-1.0, 0.0, 1.0})
            for (double b : {-0.5, 0.0, 1.0}) laws.push_back(meixner_measure({a, b}));
        for (auto p : {MarchenkoPasturParams{0.5, 1.0}, {1.0, 1.0}, {2.0, 0.5}, {0.3, 2.0}})
            laws.push_back(mp_measure(p));
        for (auto p : {FreeBinomialParams{1.0, 1.0}, {0.5, 2.0}, {0.6, 0.7}, {3.0, 2.0}})
            laws.push_back(binomial_measure(p));
        double ks = 0.0, atom = 0.0;
        for (const auto& m : laws) {
            const auto rec = recover_measure(cauchy_handle(m), m.hull_lo(), m.hull_hi()).measure;
            ks = std::max(ks, ks_distance(rec, m));
            for (const auto& a : m.atoms())
                atom = std::max(atom, std::abs(rec.mass_at(a.location, 1e-6).value_or(0.0) - a.mass));
            for (const auto& a : rec.atoms())
                if (!m.mass_at(a.location, 1e-6)) atom = std::max(atom, a.mass);
        }
        const auto mp = recover_measure(cauchy_handle(mp_measure({0.5, 1.0})), 0.0, 4.0).measure;
        const double zero = mp.mass_at(0.0, 1e-6).value_or(0.0);
        o.below("KS", ks, 1e-3);
        o.below("atom_err", atom, 1e-4);
        o.below("MP_atom_err", std::abs(zero - 0.5), 1e-4);
    });

    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
