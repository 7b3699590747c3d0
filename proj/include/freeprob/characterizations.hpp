#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "freeprob/analytic.hpp"
#include "freeprob/convolution.hpp"
#include "freeprob/measure.hpp"
#include "freeprob/params.hpp"

namespace freeprob {

/// τ(X | X+Y) = α(X+Y) with Var(X | X+Y) quadratic in X+Y with coefficients (1, a, b).
struct RegressionSpec {
    double alpha = 0.5;
    double beta = 0.5;
    double a = 0.0;
    double b = 0.0;

    static RegressionSpec from_alpha(double alpha, double a, double b) { return {alpha, 1.0 - alpha, a, b}; }
};

void check_admissible(const RegressionSpec& s);

/// Moments of the pair (V, U) entering the dual regressions.
struct MixedMoments {
    double tau_V = 0.0;
    double tau_V2 = 0.0;
    double tau_VU = 0.0;
    double tau_VU2 = 0.0;
    /// ψ_{V½UV½}(1).
    double psi_at_one = 0.0;
};

struct DualRegressionSpec {
    double c = 0.0;
    double d = 0.0;
    MixedMoments mixed_moments;
};

/// c = τ(V) − τ(VU), d = τ(V²) − τ((VU)²) − 2cτ(VU).
DualRegressionSpec dual_spec_from_moments(const MixedMoments& m);

struct IdentityResidual {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// residual_sup is the largest detail residual rescaled to `tolerance`, so pass ⇔ residual_sup ≤ tolerance.
struct VerificationReport {
    std::string theorem_id;
    std::vector<Complex> grid;
    std::vector<double> s_grid;
    double residual_sup = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::vector<IdentityResidual> details;
    /// Quantities computed along the way (moments, fixed points), for the record.
    std::vector<std::pair<std::string, double>> values;

    void add(std::string name, double residual, double tol);
    double residual(const std::string& name) const;
};

/// Law of √α·X̃ with X̃ ~ μ_{a/√α, b/α}.
SpectralMeasure scaled_meixner_measure(double scale2, double a, double b, std::size_t n_nodes = 2000);

VerificationReport verify_free_laha_lukacs(const RegressionSpec& spec,
                                           const std::vector<Complex>& grid = default_verification_grid(),
                                           double tol = 1e-7);

/// 1/L_Y with L_Y = αz + β·L_{μ_{a,b}}.
AnalyticFunctionHandle monotone_Y_cauchy(const RegressionSpec& spec);
/// The rationalized closed form ((1+α+2b)z + βa − β√((z−a)² − 4(1+b))) / (2((α+b)z² + aβz + β²)).
Complex monotone_Y_G_closed_form(const RegressionSpec& spec, Complex z);
SpectralMeasure monotone_Y_measure(const RegressionSpec& spec);

VerificationReport verify_monotone_laha_lukacs(const RegressionSpec& spec,
                                               const std::vector<Complex>& grid = default_verification_grid(),
                                               double tol = 1e-7);

struct PoissonBinomialParams {
    double lambda = 0.0;
    double alpha = 0.0;
    double sigma = 0.0;
    double theta = 0.0;
    double c() const { return alpha * theta; }
    double d() const { return c() * c() + alpha * c(); }
};

PoissonBinomialParams thm6_params(double c, double d, double lambda_total);

VerificationReport verify_poisson_binomial(const PoissonBinomialParams& p,
                                           const std::vector<double>& s_grid = default_s_grid(),
                                           double tol = 1e-5);

struct BetaPairParams {
    FreeBinomialParams X;
    FreeBinomialParams Y;
};

/// Throws InadmissibleError naming every non-positive parameter.
BetaPairParams thm7_params(double c, double d, double alpha1);

struct Alpha1FixedPoint {
    double alpha1 = 0.0;
    int iterations = 0;
    double step = 0.0;
    std::vector<double> history;
};

/// ψ_{Y½XY½}(1) for the pair given by thm7_params(c, d, α).
double thm7_psi_at_one(double c, double d, double alpha1);
/// Iterates α ↦ ψ_{Y½XY½}(1) from alpha0 until the step is below tol.
Alpha1FixedPoint solve_thm7_alpha1(double c, double d, double alpha0 = 1.0, double tol = 1e-8, int max_iter = 50);

VerificationReport verify_beta_characterization(double c, double d, double alpha1,
                                                const std::vector<double>& s_grid = default_s_grid(),
                                                double tol = 1e-5);

struct IdentitySides {
    Complex lhs;
    Complex rhs;
};

/// xⁿψ(x,z) and z⁻ⁿ(ψ(x,z) − Σ_{i=1}^n (zx)ⁱ) with ψ(x,z) = zx/(1 − zx); zx = 1 rejected.
IdentitySides lemma1_sides(int n, double x, Complex z);
/// ψ(x,z)/(1 − x) and z/(z − 1)·(ψ(x,z) − ψ(x,1)); x = 1, z = 1 and zx = 1 rejected.
IdentitySides psi_tr2_sides(double x, Complex z);

/// max |lhs − rhs| / (1 + |lhs|) of lemma1_sides over random samples.
double lemma1_identity_check(int n, int samples, std::uint64_t seed = 1);
/// Same for psi_tr2_sides.
double psi_tr2_identity_check(int samples, std::uint64_t seed = 1);

}  // namespace freeprob
