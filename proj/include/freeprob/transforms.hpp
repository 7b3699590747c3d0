#pragma once

#include <limits>
#include <vector>

#include "freeprob/analytic.hpp"
#include "freeprob/measure.hpp"

namespace freeprob {

struct InversionConfig {
    double newton_tol = 1e-13;
    int max_iter = 100;
    /// Starting point; NaN selects a default.
    Complex seed_point{std::numeric_limits<double>::quiet_NaN(), 0.0};
};

/// G(z) = ∫ μ(dx)/(z − x). Real z is accepted off the support.
Complex cauchy_G(const SpectralMeasure& m, Complex z);
Complex cauchy_G_derivative(const SpectralMeasure& m, Complex z);
/// Cauchy-kind handle on the upper half-plane with analytic derivative.
AnalyticFunctionHandle cauchy_handle(const SpectralMeasure& m);

Complex reciprocal_L(const SpectralMeasure& m, Complex z);

/// Solves 1/G(z) = w for z in the upper half-plane.
Complex invert_L(const AnalyticFunctionHandle& G, Complex w, const InversionConfig& cfg = {});
Complex invert_L(const SpectralMeasure& m, Complex w, const InversionConfig& cfg = {});

Complex voiculescu_phi(const AnalyticFunctionHandle& G, Complex z, const InversionConfig& cfg = {});
Complex voiculescu_phi(const SpectralMeasure& m, Complex z, const InversionConfig& cfg = {});

/// R(w) = φ(1/w). Uses conjugate symmetry below the axis; real w is solved on the real line.
Complex r_transform(const SpectralMeasure& m, Complex w, const InversionConfig& cfg = {});
Complex r_transform(const AnalyticFunctionHandle& G, Complex w, const InversionConfig& cfg = {});

/// κ_1..κ_n as Taylor coefficients of R, by a trapezoidal contour on |w| = radius.
std::vector<double> r_transform_cumulants(const SpectralMeasure& m, int n, double radius = 0.0,
                                          const InversionConfig& cfg = {});

/// ψ(z) = ∫ zξ/(1 − zξ) dμ(ξ) by quadrature.
Complex psi_transform(const SpectralMeasure& m, Complex z);
Complex psi_derivative(const SpectralMeasure& m, Complex z);
/// ψ(z) = G(1/z)/z − 1 evaluated through a Cauchy handle (z in the lower half-plane uses conjugation).
Complex psi_from_cauchy(const AnalyticFunctionHandle& G, Complex z);
AnalyticFunctionHandle psi_handle(const SpectralMeasure& m);

/// Solves ψ(z) = w. `zero_mass` is μ({0}), bounding the real range (μ({0}) − 1, 0).
Complex chi_inverse(const SpectralMeasure& m, Complex w, const InversionConfig& cfg = {});
Complex chi_inverse(const AnalyticFunctionHandle& psi, Complex w, double zero_mass, double first_moment,
                    const InversionConfig& cfg = {});

/// S(w) = (1 + w)χ(w)/w.
Complex s_transform(const SpectralMeasure& m, Complex w, const InversionConfig& cfg = {});
Complex s_transform(const AnalyticFunctionHandle& psi, Complex w, double zero_mass, double first_moment,
                    const InversionConfig& cfg = {});

/// Free cumulants κ_1..κ_n from moments m_1..m_n (moments[0] is m_1).
std::vector<double> free_cumulants(const std::vector<double>& moments, int n);
/// Inverse of free_cumulants.
std::vector<double> moments_from_free_cumulants(const std::vector<double>& cumulants, int n);

}  // namespace freeprob
