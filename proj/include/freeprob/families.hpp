#pragma once

#include <cstddef>
#include <vector>

#include "freeprob/analytic.hpp"
#include "freeprob/measure.hpp"
#include "freeprob/params.hpp"

namespace freeprob {

/// Minimum density nodes; the grid is refined up to 16× when an atom or pole sits next to a support edge.
inline constexpr std::size_t kDefaultNodes = 2000;

// Free Meixner laws

/// Closed-form Cauchy transform; requires Im z > 0 and enforces Im G ≤ 0.
Complex meixner_G(const MeixnerParams& p, Complex z);
Complex meixner_G_derivative(const MeixnerParams& p, Complex z);
AnalyticFunctionHandle meixner_cauchy_handle(const MeixnerParams& p);
/// (1 + za + bz²)G² − (z + a + 2bz)G + 1 + b.
Complex meixner_quadratic_residual(const MeixnerParams& p, Complex z, Complex G);

SpectralMeasure meixner_measure(const MeixnerParams& p, std::size_t n_nodes = kDefaultNodes);

/// Where a closed form was replaced by a numeric evaluation, the size of the disagreement.
struct BranchRecord {
    bool closed_form_used = true;
    double discrepancy = 0.0;
};

/// φ(z) = 2/((z − a)(1 + √(1 − 4b/(z − a)²))), the branch continuous from z → i∞.
Complex meixner_phi(const MeixnerParams& p, Complex z, BranchRecord* record = nullptr);
/// R(w) = φ(1/w) = (w/u)·2/(1 + √(1 − 4bw²/u²)), u = 1 − aw.
Complex meixner_R(const MeixnerParams& p, Complex w, BranchRecord* record = nullptr);

/// One sign choice of (z − a + s_root·√((z + s_a·a)² − 4b))/(2b), root taken ~ (z + s_a·a) at infinity.
struct BranchVariant {
    int sign_root = 1;
    int sign_a = 1;
    Complex value;
    double residual = 0.0;  // against the numerically inverted transform
};
std::vector<BranchVariant> audit_meixner_phi(const MeixnerParams& p, Complex z);
/// Same for (1 − aw + s_root·√((1 + s_a·aw)² − 4bw²))/(2bw).
std::vector<BranchVariant> audit_meixner_R(const MeixnerParams& p, Complex w);

// Free Poisson laws

SpectralMeasure mp_measure(const MarchenkoPasturParams& p, std::size_t n_nodes = kDefaultNodes);
Complex mp_S(const MarchenkoPasturParams& p, Complex w);

// Free binomial laws

struct BinomialSupport {
    double lo = 0.0;
    double hi = 0.0;
};
BinomialSupport binomial_support(const FreeBinomialParams& p);
SpectralMeasure binomial_measure(const FreeBinomialParams& p, std::size_t n_nodes = kDefaultNodes);
Complex binomial_S(const FreeBinomialParams& p, Complex w);

/// Closed-form S-transform of a labelled free Poisson or free binomial law.
bool has_closed_form_S(const SpectralMeasure& m);
Complex closed_form_S(const SpectralMeasure& m, Complex w);

}  // namespace freeprob
