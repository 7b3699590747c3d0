#include "freeprob/characterizations.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "freeprob/errors.hpp"
#include "freeprob/families.hpp"
#include "freeprob/inversion.hpp"
#include "freeprob/parallel.hpp"
#include "freeprob/transforms.hpp"

namespace freeprob {

namespace {

// Per-point residuals in parallel, reduced by max.
double sup_over(std::size_t n, const std::function<double(std::size_t)>& f)
{
    std::vector<double> r(n, 0.0);
    parallel_for(n, [&](std::size_t i) { r[i] = f(i); });
    double m = 0.0;
    for (double v : r) m = std::isfinite(v) ? std::max(m, v) : std::numeric_limits<double>::infinity();
    return m;
}

Complex G_sym(const SpectralMeasure& m, Complex z)
{
    if (z.imag() < 0.0) return std::conj(cauchy_G(m, std::conj(z)));
    return cauchy_G(m, z);
}

void finish(VerificationReport& r)
{
    r.residual_sup = 0.0;
    r.pass = true;
    for (const auto& d : r.details) {
        r.residual_sup = std::max(r.residual_sup, d.residual * (r.tolerance / d.tolerance));
        r.pass = r.pass && d.pass;
    }
    r.pass = r.pass && r.residual_sup <= r.tolerance;
}

// Re ψ(1) from ψ(1 + iε), Richardson in ε².
double psi_at_one(const AnalyticFunctionHandle& psi)
{
    const double e = 1e-6;
    const double f1 = psi(Complex(1.0, e)).real();
    const double f2 = psi(Complex(1.0, 2.0 * e)).real();
    return (4.0 * f1 - f2) / 3.0;
}

}  // namespace

void VerificationReport::add(std::string name, double r, double tol)
{
    details.push_back({std::move(name), r, tol, std::isfinite(r) && r <= tol});
}

double VerificationReport::residual(const std::string& name) const
{
    for (const auto& d : details)
        if (d.name == name) return d.residual;
    throw DomainError("VerificationReport: no identity named " + name);
}

void check_admissible(const RegressionSpec& s)
{
    if (!(s.alpha > 0.0) || !(s.beta > 0.0))
        throw InadmissibleError("RegressionSpec: alpha and beta must be positive");
    if (std::abs(s.alpha + s.beta - 1.0) > 1e-12) throw InadmissibleError("RegressionSpec: alpha + beta must be 1");
    if (!std::isfinite(s.a) || !std::isfinite(s.b)) throw InadmissibleError("RegressionSpec: a, b must be finite");
    if (s.b / s.alpha < -1.0 || s.b / s.beta < -1.0)
        throw InadmissibleError("RegressionSpec: b/alpha and b/beta must be >= -1");
}

DualRegressionSpec dual_spec_from_moments(const MixedMoments& m)
{
    DualRegressionSpec s;
    s.mixed_moments = m;
    s.c = m.tau_V - m.tau_VU;
    s.d = m.tau_V2 - m.tau_VU2 - 2.0 * s.c * m.tau_VU;
    return s;
}

SpectralMeasure scaled_meixner_measure(double scale2, double a, double b, std::size_t n_nodes)
{
    if (!(scale2 > 0.0)) throw InadmissibleError("scaled_meixner_measure: scale must be positive");
    const double r = std::sqrt(scale2);
    const MeixnerParams p{a / r, b / scale2};
    check_admissible(p);
    return dilate(meixner_measure(p, n_nodes), r);
}

VerificationReport verify_free_laha_lukacs(const RegressionSpec& spec, const std::vector<Complex>& grid, double tol)
{
    check_admissible(spec);
    const double al = spec.alpha, be = spec.beta, a = spec.a, b = spec.b;
    const SpectralMeasure X = scaled_meixner_measure(al, a, b);
    const SpectralMeasure Y = scaled_meixner_measure(be, a, b);
    FixedPointConfig cfg;
    cfg.verification_grid = grid;
    const FreeAddition sum = free_add(X, Y, cfg);
    const MeixnerParams p{a, b};

    VerificationReport r;
    r.theorem_id = "free-laha-lukacs";
    r.grid = grid;
    r.tolerance = tol;
    const auto& w1 = sum.subordination.omega1;
    r.add("first_moment", sup_over(grid.size(), [&](std::size_t i) {
              const Complex z = grid[i], G = sum.cauchy(z), F = w1(z);
              return std::abs(al * (z * G - 1.0) - (F * G_sym(X, F) - 1.0));
          }), tol);
    r.add("conditional_variance", sup_over(grid.size(), [&](std::size_t i) {
              const Complex z = grid[i], G = sum.cauchy(z), F = w1(z);
              const Complex lhs = al * be * ((1.0 + a * z + b * z * z) * G - a - z * b) / (b + 1.0) +
                                  al * al * (-z + z * z * G);
              return std::abs(lhs - (-F + F * F * G_sym(X, F)));
          }), tol);
    r.add("meixner_law", sup_over(grid.size(), [&](std::size_t i) {
              return std::abs(sum.cauchy(grid[i]) - meixner_G(p, grid[i]));
          }), tol);
    r.add("meixner_quadratic", sup_over(grid.size(), [&](std::size_t i) {
              return std::abs(meixner_quadratic_residual(p, grid[i], sum.cauchy(grid[i])));
          }), tol);
    r.add("subordination", sum.subordination.residual_sup, tol);
    r.add("recovered_law_ks", ks_distance(sum.law, meixner_measure(p)), 1e-3);
    finish(r);
    return r;
}

AnalyticFunctionHandle monotone_Y_cauchy(const RegressionSpec& spec)
{
    check_admissible(spec);
    const MeixnerParams p{spec.a, spec.b};
    check_admissible(p);
    const double al = spec.alpha, be = spec.beta;
    auto L = [p, al, be](Complex z) { return al * z + be / meixner_G(p, z); };
    return AnalyticFunctionHandle(
        [L](Complex z) { return 1.0 / L(z); }, Domain::upper_half_plane(), HandleKind::Cauchy,
        [p, al, be, L](Complex z) {
            const Complex g = meixner_G(p, z);
            const Complex dL = al - be * meixner_G_derivative(p, z) / (g * g);
            const Complex l = L(z);
            return -dL / (l * l);
        });
}

Complex monotone_Y_G_closed_form(const RegressionSpec& spec, Complex z)
{
    const double al = spec.alpha, be = spec.beta, a = spec.a, b = spec.b;
    const double c = std::sqrt(1.0 + b);
    // Root ~ z − a at infinity, so that G ~ 1/z.
    const Complex s = std::sqrt(z - a - 2.0 * c) * std::sqrt(z - a + 2.0 * c);
    const Complex den = 2.0 * ((al + b) * z * z + a * be * z + be * be);
    const Complex lin = (1.0 + al + 2.0 * b) * z + be * a;
    // removable zero of the denominator: use the unrationalized form 2(1+b)/(lin + βs)
    if (std::abs(den) < 1e-6 * (1.0 + std::abs(z * z))) return 2.0 * (1.0 + b) / (lin + be * s);
    return (lin - be * s) / den;
}

SpectralMeasure monotone_Y_measure(const RegressionSpec& spec)
{
    const AnalyticFunctionHandle g = monotone_Y_cauchy(spec);
    const SpectralMeasure mu = meixner_measure({spec.a, spec.b});
    const double be = spec.beta;
    const double lo = std::min(mu.hull_lo(), be * mu.hull_lo());
    const double hi = std::max(mu.hull_hi(), be * mu.hull_hi());
    RecoveryOptions opt;
    // Real roots of the closed-form denominator are the only possible atoms.
    const double qa = spec.alpha + spec.b, qb = spec.a * be, qc = be * be;
    if (std::abs(qa) > 1e-14) {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
            for (double sg : {-1.0, 1.0}) opt.stieltjes.atom_candidates.push_back((-qb + sg * std::sqrt(disc)) / (2.0 * qa));
        }
    } else if (std::abs(qb) > 1e-14) {
        opt.stieltjes.atom_candidates.push_back(-qc / qb);
    }
    const double pad = 0.05 * (hi - lo);
    double lo2 = lo - pad, hi2 = hi + pad;
    for (double x : opt.stieltjes.atom_candidates) {
        lo2 = std::min(lo2, x - pad);
        hi2 = std::max(hi2, x + pad);
    }
    return recover_measure(g, lo2, hi2, opt).measure;
}

VerificationReport verify_monotone_laha_lukacs(const RegressionSpec& spec, const std::vector<Complex>& grid,
                                               double tol)
{
    check_admissible(spec);
    const SpectralMeasure X = scaled_meixner_measure(spec.alpha, spec.a, spec.b);
    const SpectralMeasure Y = monotone_Y_measure(spec);
    const MeixnerParams p{spec.a, spec.b};
    const AnalyticFunctionHandle gy = monotone_Y_cauchy(spec);

    VerificationReport r;
    r.theorem_id = "monotone-laha-lukacs";
    r.grid = grid;
    r.tolerance = tol;
    r.add("composition", sup_over(grid.size(), [&](std::size_t i) {
              const Complex LY = 1.0 / cauchy_G(Y, grid[i]);
              return std::abs(cauchy_G(X, LY) - meixner_G(p, grid[i]));
          }), tol);
    r.add("reciprocal_Y", sup_over(grid.size(), [&](std::size_t i) {
              const Complex z = grid[i];
              const Complex LY = 1.0 / cauchy_G(Y, z);
              return std::abs(LY - (spec.alpha * z + spec.beta / meixner_G(p, z)));
          }), tol * 1e-2);
    r.add("closed_form_Y", sup_over(grid.size(), [&](std::size_t i) {
              return std::abs(monotone_Y_G_closed_form(spec, grid[i]) - gy(grid[i]));
          }), tol);
    const ConvolutionResult bp = boolean_power(meixner_measure(p), spec.beta);
    r.add("boolean_power_ks", ks_distance(Y, bp.law), 1e-3);
    r.values.emplace_back("Y_mass", Y.total_mass());
    finish(r);
    return r;
}

PoissonBinomialParams thm6_params(double c, double d, double lambda_total)
{
    if (!(c > 0.0)) throw InadmissibleError("thm6_params: c must be positive");
    if (!(d > c * c)) throw InadmissibleError("thm6_params: d must exceed c^2");
    PoissonBinomialParams p;
    p.lambda = lambda_total;
    p.theta = c * c / (d - c * c);
    p.alpha = (d - c * c) / c;
    p.sigma = lambda_total - p.theta;
    if (!(p.sigma > 0.0)) throw InadmissibleError("thm6_params: lambda must exceed theta = c^2/(d - c^2)");
    check_admissible(MarchenkoPasturParams{p.lambda, p.alpha});
    check_admissible(FreeBinomialParams{p.sigma, p.theta});
    return p;
}

VerificationReport verify_poisson_binomial(const PoissonBinomialParams& p, const std::vector<double>& s_grid,
                                           double tol)
{
    check_admissible(MarchenkoPasturParams{p.lambda, p.alpha});
    check_admissible(FreeBinomialParams{p.sigma, p.theta});
    if (std::abs(p.lambda - p.sigma - p.theta) > 1e-12 * std::max(1.0, p.lambda))
        throw InadmissibleError("verify_poisson_binomial: lambda must equal sigma + theta");
    if (p.lambda < 1.0) throw InadmissibleError("verify_poisson_binomial: V must have no atom at 0 (lambda >= 1)");
    const double al = p.alpha, la = p.lambda, c = p.c(), d = p.d();
    const SpectralMeasure V = mp_measure({la, al});
    const SpectralMeasure U = binomial_measure({p.sigma, p.theta});
    const FreeProduct W = free_mult(V, U);

    VerificationReport r;
    r.theorem_id = "poisson-binomial";
    r.s_grid = s_grid;
    r.tolerance = tol;
    r.add("S_W", sup_over(s_grid.size(), [&](std::size_t i) {
              const double w = s_grid[i];
              return std::abs(s_transform(W.psi, w, W.mass_at_zero, W.mean) - 1.0 / (al * la - c + al * w));
          }), tol);
    r.add("S_V", sup_over(s_grid.size(), [&](std::size_t i) {
              const double w = s_grid[i];
              return std::abs(s_transform(V, w) - 1.0 / (al * la + al * w));
          }), tol);
    r.add("S_U", sup_over(s_grid.size(), [&](std::size_t i) {
              const double w = s_grid[i];
              return std::abs(s_transform(U, w) - (1.0 + c / (al * la + al * w - c)));
          }), tol);

    MixedMoments mm;
    mm.tau_V = mean(V);
    mm.tau_V2 = moment(V, 2);
    mm.tau_VU = mean(W.law);
    mm.tau_VU2 = moment(W.law, 2);
    mm.psi_at_one = std::numeric_limits<double>::quiet_NaN();
    const DualRegressionSpec obs = dual_spec_from_moments(mm);
    r.add("c_moment", std::abs(obs.c - c), tol);
    r.add("d_moment", std::abs(obs.d - d), tol);
    const double tau_vu_rule = mean(V) * mean(U);
    r.add("product_mean", std::abs(tau_vu_rule - mm.tau_VU), tol);
    r.add("sigma_formula", std::abs(c * (tau_vu_rule + 2.0 * c - 2.0 * mm.tau_V) / (c * c - d) - p.sigma), tol);

    const std::vector<Complex> zs{{-0.1, 0.0}, {-0.5, 0.0}, {-1.0, 0.0}, {-3.0, 0.0}, {-1.0, 1.0},
                                  {0.0, 0.5},  {0.5, 1.0},  {1.0, -1.0}, {2.0, 2.0}};
    r.add("psi_W_quadratic", sup_over(zs.size(), [&](std::size_t i) {
              const Complex z = zs[i], s = W.psi(z);
              return std::abs(al * z * s * s - s * (1.0 + (c - al * (1.0 + la)) * z) - (c - al * la) * z);
          }), tol);
    r.add("psi_V_quadratic", sup_over(zs.size(), [&](std::size_t i) {
              const Complex z = zs[i], s = psi_transform(V, z);
              return std::abs(al * z * s * s + s * (al * z + al * la * z - 1.0) + al * la * z);
          }), tol);
    r.values = {{"c", c},           {"d", d},           {"tau_V", mm.tau_V},       {"tau_V2", mm.tau_V2},
                {"tau_VU", mm.tau_VU}, {"tau_VU2", mm.tau_VU2}, {"observed_c", obs.c}, {"observed_d", obs.d}};
    finish(r);
    return r;
}

BetaPairParams thm7_params(double c, double d, double alpha1)
{
    const double den = c * d - 1.0;
    if (std::abs(den) < 1e-12) throw InadmissibleError("thm7_params: c*d = 1 is a pole");
    BetaPairParams p;
    p.X.sigma = (1.0 - c) * d * alpha1 / den;
    p.X.theta = (c - 1.0) * (d - 1.0) / (1.0 - c * d);
    p.Y.sigma = (1.0 - c) * (d * (alpha1 + 1.0) - 1.0) / den;
    p.Y.theta = c * (1.0 - d) / (1.0 - c * d);
    std::ostringstream bad;
    const std::pair<const char*, double> all[] = {
        {"sigma_X", p.X.sigma}, {"theta_X", p.X.theta}, {"sigma_Y", p.Y.sigma}, {"theta_Y", p.Y.theta}};
    for (const auto& [name, v] : all)
        if (!(v > 0.0)) bad << ' ' << name << '=' << v;
    if (!bad.str().empty()) throw InadmissibleError("thm7_params: non-positive parameters:" + bad.str());
    check_admissible(p.X);
    check_admissible(p.Y);
    return p;
}

double thm7_psi_at_one(double c, double d, double alpha1)
{
    const BetaPairParams p = thm7_params(c, d, alpha1);
    const ProductTransforms T = free_mult_transforms(binomial_measure(p.Y), binomial_measure(p.X));
    return psi_at_one(T.psi);
}

Alpha1FixedPoint solve_thm7_alpha1(double c, double d, double alpha0, double tol, int max_iter)
{
    Alpha1FixedPoint fp;
    double a = alpha0;
    fp.history.push_back(a);
    for (int k = 1; k <= max_iter; ++k) {
        const double next = thm7_psi_at_one(c, d, a);
        fp.history.push_back(next);
        fp.iterations = k;
        fp.step = std::abs(next - a);
        a = next;
        if (fp.step <= tol) {
            fp.alpha1 = a;
            return fp;
        }
    }
    std::vector<Complex> trace(fp.history.begin(), fp.history.end());
    throw ConvergenceError("solve_thm7_alpha1: alpha1 iteration did not converge", trace);
}

VerificationReport verify_beta_characterization(double c, double d, double alpha1, const std::vector<double>& s_grid,
                                                double tol)
{
    const BetaPairParams p = thm7_params(c, d, alpha1);
    const SpectralMeasure X = binomial_measure(p.X);
    const SpectralMeasure Y = binomial_measure(p.Y);
    const ProductTransforms W = free_mult_transforms(Y, X);
    const double al = alpha1, q = 1.0 - c * d;

    std::vector<Complex> sw(s_grid.size()), sx(s_grid.size()), sy(s_grid.size());
    parallel_for(s_grid.size(), [&](std::size_t i) {
        const double w = s_grid[i];
        sw[i] = s_transform(W.psi, w, W.mass_at_zero, W.mean);
        sx[i] = s_transform(X, w);
        sy[i] = s_transform(Y, w);
    });
    double e_w = 0.0, e_x = 0.0, e_y = 0.0, e_p = 0.0;
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        const double w = s_grid[i];
        e_w = std::max(e_w, std::abs(sw[i] - (1.0 + (1.0 - d) / ((c - 1.0) * d * al + w * q))));
        e_x = std::max(e_x, std::abs(sx[i] - (1.0 + (c - 1.0) * (d - 1.0) / ((c - 1.0) * d * al + w * q))));
        e_y = std::max(e_y, std::abs(sy[i] - (1.0 + c * (1.0 - d) / ((c - 1.0) * (d * (1.0 + al) - 1.0) + w * q))));
        e_p = std::max(e_p, std::abs(sw[i] - sx[i] * sy[i]));
    }
    const double psi1 = psi_at_one(W.psi);

    VerificationReport r;
    r.theorem_id = "beta-characterization";
    r.s_grid = s_grid;
    r.tolerance = tol;
    r.add("alpha1_consistency", std::abs(psi1 - al), tol);
    r.add("S_XY", e_w, tol);
    r.add("S_X", e_x, tol);
    r.add("S_Y", e_y, tol);
    r.add("S_product", e_p, std::min(tol, 1e-6));
    r.values = {{"alpha1", al},          {"psi_W_at_one", psi1},  {"sigma_X", p.X.sigma},
                {"theta_X", p.X.theta}, {"sigma_Y", p.Y.sigma}, {"theta_Y", p.Y.theta}};
    finish(r);
    return r;
}

IdentitySides lemma1_sides(int n, double x, Complex z)
{
    if (n < 0 || n > 8) throw DomainError("lemma1: n must lie in [0, 8]");
    const Complex zx = z * x;
    if (zx == Complex(1.0)) throw DomainError("lemma1: zx = 1 is excluded");
    if (n > 0 && z == Complex(0.0)) throw DomainError("lemma1: z = 0 is excluded");
    const Complex psi = zx / (1.0 - zx);
    Complex sum = 0.0, t = 1.0;
    for (int i = 1; i <= n; ++i) {
        t *= zx;
        sum += t;
    }
    return {std::pow(x, n) * psi, (psi - sum) / std::pow(z, n)};
}

IdentitySides psi_tr2_sides(double x, Complex z)
{
    if (x == 1.0 || z == Complex(1.0) || z * x == Complex(1.0))
        throw DomainError("psi_tr2: x = 1, z = 1 and zx = 1 are excluded");
    auto psi = [x](Complex w) { return w * x / (1.0 - w * x); };
    return {psi(z) / (1.0 - x), z / (z - 1.0) * (psi(z) - psi(1.0))};
}

double lemma1_identity_check(int n, int samples, std::uint64_t seed)
{
    if (n < 0 || n > 8) throw DomainError("lemma1_identity_check: n must lie in [0, 8]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.5, 2.0), ang(-M_PI, M_PI), sgn(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < samples;) {
        const double x = (sgn(rng) < 0.5 ? -1.0 : 1.0) * mag(rng);
        const Complex z = std::polar(mag(rng), ang(rng));
        if (std::abs(1.0 - z * x) < 0.1) continue;
        const auto s = lemma1_sides(n, x, z);
        worst = std::max(worst, std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs)));
        ++k;
    }
    return worst;
}

double psi_tr2_identity_check(int samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), mag(0.2, 3.0), ang(-M_PI, M_PI);
    double worst = 0.0;
    for (int k = 0; k < samples;) {
        const double x = ux(rng);
        const Complex z = std::polar(mag(rng), ang(rng));
        if (std::abs(1.0 - x) < 0.1 || std::abs(1.0 - z * x) < 0.1 || std::abs(z - 1.0) < 0.1) continue;
        const auto s = psi_tr2_sides(x, z);
        worst = std::max(worst, std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs)));
        ++k;
    }
    return worst;
}

}  // namespace freeprob
