#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "freeprob/errors.hpp"
#include "freeprob/params.hpp"

namespace freeprob {

inline constexpr double kNormTolerance = 1e-6;
inline constexpr double kAtomCollisionTolerance = 1e-12;

struct Atom {
    double location = 0.0;
    double mass = 0.0;
};

/// Absolutely continuous part sampled on a node grid inside [support_lo, support_hi].
struct DensityGrid {
    double support_lo = 0.0;
    double support_hi = 0.0;
    std::vector<double> nodes;
    std::vector<double> values;
};

struct AtomCollision {
    std::size_t first = 0;
    std::size_t second = 0;
    double distance = 0.0;
};

struct MeasureDiagnostics {
    double total_mass = 0.0;
    double atom_mass = 0.0;
    double ac_mass = 0.0;
    std::size_t negative_values = 0;
    double most_negative_value = 0.0;
    std::vector<AtomCollision> collisions;
    std::vector<std::string> problems;
    bool pass = false;
};

class InvalidMeasure : public Error {
public:
    explicit InvalidMeasure(MeasureDiagnostics d);
    const MeasureDiagnostics& diagnostics() const { return diag_; }

private:
    MeasureDiagnostics diag_;
};

/// Chebyshev first-kind nodes on [lo, hi], increasing.
std::vector<double> chebyshev_nodes(double lo, double hi, std::size_t n);

/// Cosine series of ρ(x(θ))·sin θ on a Chebyshev grid; evaluates the Cauchy transform in closed form.
class ChebyshevCauchy {
public:
    ChebyshevCauchy(double lo, double hi, std::vector<double> coefficients);
    std::complex<double> value(std::complex<double> z) const;
    std::complex<double> derivative(std::complex<double> z) const;
    double mass() const;
    const std::vector<double>& coefficients() const { return c_; }

private:
    double mid_;
    double hw_;
    std::vector<double> c_;
    /// tail_[k] = max_{j ≥ k} |c_j|, for truncating the series once the remaining terms are below rounding.
    std::vector<double> tail_;
};

/// Immutable probability measure: atoms plus an optional gridded density.
class SpectralMeasure {
public:
    SpectralMeasure(std::vector<Atom> atoms, std::optional<DensityGrid> ac = std::nullopt,
                    std::optional<FamilyLabel> family = std::nullopt);

    static SpectralMeasure point_mass(double location);

    const std::vector<Atom>& atoms() const;
    const std::optional<DensityGrid>& ac() const;
    const std::optional<FamilyLabel>& family() const;

    /// Quadrature weights for the density nodes (empty without ac part).
    const std::vector<double>& weights() const;
    /// Non-null when the density lives on a Chebyshev grid.
    const ChebyshevCauchy* chebyshev() const;

    double total_mass() const;
    double atom_mass() const;
    /// Smallest interval containing every atom and the density support.
    double hull_lo() const;
    double hull_hi() const;
    /// Boundaries of the quadrature cells and the density mass accumulated up to each.
    const std::vector<double>& cell_edges() const;
    const std::vector<double>& cell_cumulative() const;
    std::optional<double> mass_at(double location, double tol = kAtomCollisionTolerance) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

MeasureDiagnostics validate(const std::vector<Atom>& atoms, const std::optional<DensityGrid>& ac);
MeasureDiagnostics validate(const SpectralMeasure& m);

/// Midpoint rule in the angle variable of x = mid + hw·cos θ.
std::vector<double> angle_midpoint_weights(const DensityGrid& g);

std::complex<double> integrate(const SpectralMeasure& m, const std::function<std::complex<double>(double)>& f);
double moment(const SpectralMeasure& m, int k);
double mean(const SpectralMeasure& m);
double variance(const SpectralMeasure& m);

double cdf(const SpectralMeasure& m, double x);
double quantile(const SpectralMeasure& m, double p);
double ks_distance(const SpectralMeasure& a, const SpectralMeasure& b);
/// KS distance between m and the empirical law of a sample; sample points within 1e-9 of an atom of m count as the atom.
double ks_distance_to_sample(const SpectralMeasure& m, std::vector<double> sample);

/// Law of c·X; c ≠ 0.
SpectralMeasure dilate(const SpectralMeasure& m, double c);
/// Law of X + c.
SpectralMeasure shift(const SpectralMeasure& m, double c);

}  // namespace freeprob
