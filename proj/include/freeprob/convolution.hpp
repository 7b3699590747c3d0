#pragma once

#include <vector>

#include "freeprob/analytic.hpp"
#include "freeprob/inversion.hpp"
#include "freeprob/measure.hpp"

namespace freeprob {

/// {x + iy : x ∈ {−2,…,2}, y ∈ {0.5, 1, 2}}.
std::vector<Complex> default_verification_grid();
/// 9 points spread over (−0.45, −0.05).
std::vector<double> default_s_grid();

struct FixedPointConfig {
    double tol = 1e-12;
    int max_iter = 500;
    std::vector<Complex> verification_grid = default_verification_grid();
    RecoveryOptions recovery;
};

struct SubordinationPair {
    AnalyticFunctionHandle omega1;
    AnalyticFunctionHandle omega2;
    double residual_sup = 0.0;
};

struct SubordinationDiagnostics {
    double residual_sup = 0.0;
    /// min over the grid of Im ωᵢ(z) − Im z.
    double min_im_gain = 0.0;
    /// |ω₁(iy)/(iy) − 1| at y = 10³.
    double slope_error = 0.0;
    bool im_growth_ok = false;
    bool slope_ok = false;
};

struct ConvolutionResult {
    SpectralMeasure law;
    /// Cauchy transform of the result, computed from the subordination or composition formula.
    AnalyticFunctionHandle cauchy;
    InversionDiagnostics recovery;
};

struct FreeAddition : ConvolutionResult {
    SubordinationPair subordination;
};

struct FreePower : ConvolutionResult {
    /// ω with G_result = G_μ∘ω.
    AnalyticFunctionHandle omega;
};

/// Transforms of μ ⊠ ν, available without recovering the law.
struct ProductTransforms {
    AnalyticFunctionHandle cauchy;
    /// ψ of the product law, ψ_μ∘F.
    AnalyticFunctionHandle psi;
    /// F with ψ_{μ⊠ν} = ψ_μ∘F, on ℂ∖ℝ₊.
    AnalyticFunctionHandle subordination;
    /// S_μ·S_ν, closed form for labelled families.
    AnalyticFunctionHandle s_product;
    double mass_at_zero = 0.0;
    double mean = 0.0;
    /// max over the S grid of |S from ψ_μ∘F − S_μ·S_ν|.
    double s_residual = 0.0;
    /// max over negative reals of |ψ from the S product − ψ_μ(F(z))|.
    double psi_residual = 0.0;
};

struct FreeProduct : ProductTransforms {
    SpectralMeasure law;
    InversionDiagnostics recovery;
};

FreeAddition free_add(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg = {});
FreePower free_add_power(const SpectralMeasure& mu, double t, const FixedPointConfig& cfg = {});
ConvolutionResult boolean_power(const SpectralMeasure& mu, double t, const FixedPointConfig& cfg = {});
/// μ ▷ ν with G = G_μ∘L_ν; μ is the law of the earlier variable.
ConvolutionResult monotone_add(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg = {});
ProductTransforms free_mult_transforms(const SpectralMeasure& mu, const SpectralMeasure& nu,
                                       const FixedPointConfig& cfg = {});
FreeProduct free_mult(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg = {});

/// sup over the grid of |G_ν(ω₂(z)) − G_μ(ω₁(z))|.
double subordination_residual(const SubordinationPair& pair, const SpectralMeasure& mu, const SpectralMeasure& nu,
                              const std::vector<Complex>& grid);
SubordinationDiagnostics subordination_diagnostics(const SubordinationPair& pair, const SpectralMeasure& mu,
                                                   const SpectralMeasure& nu, const std::vector<Complex>& grid);

}  // namespace freeprob
