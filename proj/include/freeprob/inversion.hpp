#pragma once

#include <limits>
#include <vector>

#include "freeprob/analytic.hpp"
#include "freeprob/measure.hpp"

namespace freeprob {

/// ε ladder for boundary values: {4r, 2r, r} with r the handle resolution, or {1e−8, 5e−9, 2.5e−9} for exact handles.
std::vector<double> default_eps_ladder(const AnalyticFunctionHandle& g);

struct AtomEstimate {
    double location = 0.0;
    double mass = 0.0;
    /// Values of −ε·Im g(x0 + iε) down the ladder.
    std::vector<double> ladder_values;
    /// |extrapolated − value at the smallest ε|.
    double spread = 0.0;
    bool converged = false;
};

/// Mass of the atom of g at x0 from ε·Im g(x0 + iε), extrapolated in √ε and ε.
AtomEstimate atom_estimate(const AnalyticFunctionHandle& g, double x0, const std::vector<double>& eps_ladder);
double atom_mass_at(const AnalyticFunctionHandle& g, double x0, const std::vector<double>& eps_ladder);

struct StieltjesOptions {
    std::vector<double> eps_ladder;  // empty: default_eps_ladder(g)
    std::vector<double> atom_candidates;
    bool scan_atoms = true;
    /// Scan window for atoms; NaN means the grid range widened by half its length on each side.
    double scan_lo = std::numeric_limits<double>::quiet_NaN();
    double scan_hi = std::numeric_limits<double>::quiet_NaN();
    int scan_points = 4000;
    double atom_threshold = 1e-9;
    /// Rescale the density when the recovered mass misses 1 by more than the normalization tolerance.
    bool allow_renormalization = false;
    double renormalization_limit = 1e-3;
    /// A defect caused by a power singularity stronger than 1/√ at a support edge is placed in the edge cell instead.
    double edge_correction_limit = 1e-2;
};

struct InversionDiagnostics {
    std::vector<double> eps_ladder;
    std::vector<AtomEstimate> atoms;
    double recovered_mass = 0.0;
    double normalization_defect = 0.0;
    bool renormalized = false;
    bool edge_corrected = false;
    double most_negative_density = 0.0;
    double support_lo = std::numeric_limits<double>::quiet_NaN();
    double support_hi = std::numeric_limits<double>::quiet_NaN();
    bool support_gaps = false;
};

struct StieltjesResult {
    SpectralMeasure measure;
    InversionDiagnostics diagnostics;
};

class InversionError : public Error {
public:
    InversionError(const std::string& what, InversionDiagnostics d) : Error(what), diag_(std::move(d)) {}
    const InversionDiagnostics& diagnostics() const { return diag_; }

private:
    InversionDiagnostics diag_;
};

/// Grid with its support interval; Chebyshev grids are recognised from their end nodes.
struct RealGrid {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> nodes;
};
RealGrid chebyshev_grid(double lo, double hi, std::size_t n);
RealGrid grid_from_nodes(const std::vector<double>& nodes);

StieltjesResult stieltjes_invert_detailed(const AnalyticFunctionHandle& g, const RealGrid& grid,
                                          const StieltjesOptions& opt = {});
SpectralMeasure stieltjes_invert(const AnalyticFunctionHandle& g, const std::vector<double>& grid,
                                 const std::vector<double>& eps_ladder = {});

struct RecoveryOptions {
    std::size_t n_nodes = 2000;
    /// Node doublings tried while the recovered mass misses 1 by more than the normalization tolerance.
    int refinements = 3;
    StieltjesOptions stieltjes;
};

/// Locates the density support inside [hull_lo, hull_hi], then inverts on a Chebyshev grid over it.
StieltjesResult recover_measure(const AnalyticFunctionHandle& g, double hull_lo, double hull_hi,
                                const RecoveryOptions& opt = {});

}  // namespace freeprob
