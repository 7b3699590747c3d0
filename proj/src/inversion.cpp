#include "freeprob/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freeprob/errors.hpp"
#include "freeprob/parallel.hpp"

namespace freeprob {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sorted_desc(std::vector<double> v)
{
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

// Value at 0 of the polynomial through (x_k, y_k).
double neville_at_zero(const std::vector<double>& x, std::vector<double> y)
{
    const std::size_t n = x.size();
    for (std::size_t m = 1; m < n; ++m)
        for (std::size_t i = 0; i + m < n; ++i)
            y[i] = (x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]);
    return y[0];
}

// Solves a small dense system in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_small(std::vector<std::vector<double>> A, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
        x[i] = s / A[i][i];
    }
    return x;
}

Complex atoms_part(const std::vector<AtomEstimate>& atoms, Complex z)
{
    Complex s = 0.0;
    for (const auto& a : atoms) s += a.mass / (z - a.location);
    return s;
}

double density_at(const AnalyticFunctionHandle& g, const std::vector<AtomEstimate>& atoms, double x,
                  const std::vector<double>& ladder)
{
    std::vector<double> v(ladder.size());
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        const Complex z(x, ladder[k]);
        v[k] = -(g(z) - atoms_part(atoms, z)).imag() / kPi;
    }
    return neville_at_zero(ladder, std::move(v));
}

// Newton on L = 1/g toward a real zero, projected to Im z ≥ floor.
double refine_atom_location(const AnalyticFunctionHandle& g, double x0, double eps, double floor, double max_shift)
{
    Complex z(x0, eps);
    for (int it = 0; it < 60; ++it) {
        const Complex gz = g(z);
        const Complex L = 1.0 / gz;
        const Complex dL = -g.derivative(z) / (gz * gz);
        if (!std::isfinite(dL.real()) || std::abs(dL) == 0.0) break;
        Complex next = z - L / dL;
        if (!(next.imag() > floor)) next.imag(floor);
        if (std::abs(next.real() - x0) > max_shift) return x0;
        const double move = std::abs(next.real() - z.real());
        z = next;
        if (move <= 1e-15 * (1.0 + std::abs(z.real()))) break;
    }
    return z.real();
}

std::vector<AtomEstimate> detect_atoms(const AnalyticFunctionHandle& g, double lo, double hi,
                                       const StieltjesOptions& opt, const std::vector<double>& ladder)
{
    std::vector<double> candidates;
    std::vector<bool> refine;
    for (double c : opt.atom_candidates) {
        candidates.push_back(c);
        refine.push_back(false);
    }
    if (opt.scan_atoms && hi > lo) {
        const int M = std::max(16, opt.scan_points);
        const double h = (hi - lo) / (M - 1);
        const double eps = 2.0 * h;
        std::vector<double> q(static_cast<std::size_t>(M));
        parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
            const double x = lo + h * static_cast<double>(i);
            q[i] = -eps * g(Complex(x, eps)).imag();
        });
        std::vector<std::pair<double, double>> peaks;
        for (int i = 0; i < M; ++i) {
            const double left = i > 0 ? q[static_cast<std::size_t>(i - 1)] : -1.0;
            const double right = i + 1 < M ? q[static_cast<std::size_t>(i + 1)] : -1.0;
            const double qi = q[static_cast<std::size_t>(i)];
            if (qi >= left && qi > right && qi > 0.5 * opt.atom_threshold)
                peaks.emplace_back(qi, lo + h * i);
        }
        std::sort(peaks.begin(), peaks.end(), std::greater<>());
        if (peaks.size() > 64) peaks.resize(64);
        std::vector<double> refined(peaks.size());
        parallel_for(peaks.size(), [&](std::size_t k) {
            refined[k] = refine_atom_location(g, peaks[k].second, eps, ladder.back(), 4.0 * h);
        });
        for (double x : refined) {
            if (std::abs(x) <= 1e-12 * (hi - lo)) x = 0.0;
            candidates.push_back(x);
            refine.push_back(true);
        }
    }

    std::vector<AtomEstimate> est(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t k) { est[k] = atom_estimate(g, candidates[k], ladder); });

    std::vector<AtomEstimate> accepted;
    for (const auto& e : est) {
        if (!(e.mass > opt.atom_threshold)) continue;
        if (e.ladder_values.back() < 0.5 * e.mass) continue;
        // An atom gives a flat ladder; a density blowing up at x0 gives q(ε) → 0 as a power of ε.
        const auto [qmin, qmax] = std::minmax_element(e.ladder_values.begin(), e.ladder_values.end());
        if (*qmax - *qmin > 0.25 * e.mass) continue;
        bool duplicate = false;
        for (auto& a : accepted) {
            if (std::abs(a.location - e.location) <= 1e-9 * (1.0 + std::abs(e.location))) {
                duplicate = true;
                if (e.mass > a.mass) a = e;
            }
        }
        if (!duplicate) accepted.push_back(e);
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const AtomEstimate& a, const AtomEstimate& b) { return a.location < b.location; });
    return accepted;
}

// Exponent β of ρ ~ d^(−β) at one end of the grid, from the two outermost nodes.
double edge_exponent(const DensityGrid& d, bool upper)
{
    const std::size_t n = d.nodes.size();
    if (n < 4) return 0.0;
    const std::size_t i1 = upper ? n - 1 : 0, i2 = upper ? n - 2 : 1;
    const double d1 = upper ? d.support_hi - d.nodes[i1] : d.nodes[i1] - d.support_lo;
    const double d2 = upper ? d.support_hi - d.nodes[i2] : d.nodes[i2] - d.support_lo;
    const double r1 = d.values[i1], r2 = d.values[i2];
    if (!(r1 > 0.0 && r2 > 0.0 && d1 > 0.0 && d2 > d1)) return 0.0;
    return std::log(r1 / r2) / std::log(d2 / d1);
}

StieltjesResult invert_on_grid(const AnalyticFunctionHandle& g, const RealGrid& grid,
                               const std::vector<double>& ladder, std::vector<AtomEstimate> atoms,
                               const StieltjesOptions& opt, InversionDiagnostics diag)
{
    diag.eps_ladder = ladder;
    diag.atoms = atoms;
    std::vector<Atom> out_atoms;
    double atom_mass = 0.0;
    for (const auto& a : atoms) {
        out_atoms.push_back({a.location, a.mass});
        atom_mass += a.mass;
    }

    std::optional<DensityGrid> ac;
    if (!grid.nodes.empty()) {
        DensityGrid d{grid.lo, grid.hi, grid.nodes, std::vector<double>(grid.nodes.size(), 0.0)};
        parallel_for(d.nodes.size(), [&](std::size_t i) { d.values[i] = density_at(g, atoms, d.nodes[i], ladder); });
        for (auto& v : d.values) {
            diag.most_negative_density = std::min(diag.most_negative_density, v);
            if (v < 0.0) v = 0.0;
        }
        if (diag.most_negative_density < -1e-6) {
            std::ostringstream os;
            os << "stieltjes_invert: extrapolated density " << diag.most_negative_density
               << " below -1e-6; the handle is not a Cauchy transform on this grid";
            throw BranchError(os.str());
        }
        const auto w = angle_midpoint_weights(d);
        double ac_mass = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) ac_mass += w[i] * d.values[i];
        if (ac_mass > 1e-10) {
            const double defect = atom_mass + ac_mass - 1.0;
            diag.normalization_defect = defect;
            if (std::abs(defect) > kNormTolerance && opt.allow_renormalization && atom_mass < 1.0) {
                const bool lo_sing = edge_exponent(d, false) > 0.55;
                const bool hi_sing = edge_exponent(d, true) > 0.55;
                if ((lo_sing || hi_sing) && std::abs(defect) <= opt.edge_correction_limit) {
                    const std::size_t last = d.values.size() - 1;
                    const double m_lo = lo_sing ? w[0] * d.values[0] : 0.0;
                    const double m_hi = hi_sing ? w[last] * d.values[last] : 0.0;
                    const double share_lo = m_lo / (m_lo + m_hi);
                    d.values[0] = std::max(0.0, d.values[0] - share_lo * defect / w[0]);
                    d.values[last] = std::max(0.0, d.values[last] - (1.0 - share_lo) * defect / w[last]);
                    diag.edge_corrected = true;
                } else if (std::abs(defect) <= opt.renormalization_limit) {
                    const double f = (1.0 - atom_mass) / ac_mass;
                    for (auto& v : d.values) v *= f;
                    diag.renormalized = true;
                }
            }
            ac = std::move(d);
        } else {
            diag.normalization_defect = atom_mass + ac_mass - 1.0;
        }
    }
    diag.recovered_mass = atom_mass;
    if (ac) {
        const auto w = angle_midpoint_weights(*ac);
        for (std::size_t i = 0; i < w.size(); ++i) diag.recovered_mass += w[i] * ac->values[i];
    }
    try {
        return {SpectralMeasure(std::move(out_atoms), std::move(ac)), diag};
    } catch (const InvalidMeasure& e) {
        throw InversionError(std::string("stieltjes_invert: ") + e.what(), diag);
    }
}

}  // namespace

std::vector<double> default_eps_ladder(const AnalyticFunctionHandle& g)
{
    const double r = g.resolution();
    if (r > 0.0) return {4.0 * r, 2.0 * r, r};
    return {1e-8, 5e-9, 2.5e-9};
}

AtomEstimate atom_estimate(const AnalyticFunctionHandle& g, double x0, const std::vector<double>& eps_ladder)
{
    if (eps_ladder.empty()) throw DomainError("atom_mass_at: empty ladder");
    const auto eps = sorted_desc(eps_ladder);
    AtomEstimate e;
    e.location = x0;
    for (double s : eps) e.ladder_values.push_back(-s * g(Complex(x0, s)).imag());
    const std::size_t n = std::min<std::size_t>(3, eps.size());
    // q(ε) = p + A√ε + Bε fitted on the n smallest ε.
    std::vector<std::vector<double>> A(n, std::vector<double>(n));
    std::vector<double> b(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double s = eps[eps.size() - n + r];
        const double basis[3] = {1.0, std::sqrt(s), s};
        for (std::size_t c = 0; c < n; ++c) A[r][c] = basis[c];
        b[r] = e.ladder_values[eps.size() - n + r];
    }
    const double p = solve_small(A, b)[0];
    e.spread = std::abs(p - e.ladder_values.back());
    e.converged = std::isfinite(p) && p > -1e-6 && e.spread <= 1e-3;
    e.mass = std::isfinite(p) ? std::max(0.0, p) : 0.0;
    return e;
}

double atom_mass_at(const AnalyticFunctionHandle& g, double x0, const std::vector<double>& eps_ladder)
{
    return atom_estimate(g, x0, eps_ladder).mass;
}

RealGrid chebyshev_grid(double lo, double hi, std::size_t n) { return {lo, hi, chebyshev_nodes(lo, hi, n)}; }

RealGrid grid_from_nodes(const std::vector<double>& nodes)
{
    if (nodes.empty()) return {};
    const std::size_t n = nodes.size();
    if (n >= 2) {
        const double mid = 0.5 * (nodes.front() + nodes.back());
        const double hw = 0.5 * (nodes.back() - nodes.front()) / std::cos(kPi / (2.0 * static_cast<double>(n)));
        const auto ref = chebyshev_nodes(mid - hw, mid + hw, n);
        bool match = true;
        for (std::size_t i = 0; i < n && match; ++i) match = std::abs(ref[i] - nodes[i]) <= 1e-12 * hw;
        if (match) return {mid - hw, mid + hw, ref};
    }
    return {nodes.front(), nodes.back(), nodes};
}

StieltjesResult stieltjes_invert_detailed(const AnalyticFunctionHandle& g, const RealGrid& grid,
                                          const StieltjesOptions& opt)
{
    if (g.kind() != HandleKind::Cauchy) throw DomainError("stieltjes_invert: handle is not a Cauchy transform");
    const auto ladder = sorted_desc(opt.eps_ladder.empty() ? default_eps_ladder(g) : opt.eps_ladder);
    double lo = opt.scan_lo, hi = opt.scan_hi;
    const double width = std::max(grid.hi - grid.lo, 1e-3);
    if (std::isnan(lo)) lo = grid.lo - 0.5 * width;
    if (std::isnan(hi)) hi = grid.hi + 0.5 * width;
    auto atoms = detect_atoms(g, lo, hi, opt, ladder);
    return invert_on_grid(g, grid, ladder, std::move(atoms), opt, {});
}

SpectralMeasure stieltjes_invert(const AnalyticFunctionHandle& g, const std::vector<double>& grid,
                                 const std::vector<double>& eps_ladder)
{
    StieltjesOptions opt;
    opt.eps_ladder = eps_ladder;
    return stieltjes_invert_detailed(g, grid_from_nodes(grid), opt).measure;
}

StieltjesResult recover_measure(const AnalyticFunctionHandle& g, double hull_lo, double hull_hi,
                                const RecoveryOptions& opt)
{
    if (g.kind() != HandleKind::Cauchy) throw DomainError("recover_measure: handle is not a Cauchy transform");
    if (!(hull_hi >= hull_lo)) throw DomainError("recover_measure: empty hull");
    const auto ladder = sorted_desc(opt.stieltjes.eps_ladder.empty() ? default_eps_ladder(g) : opt.stieltjes.eps_ladder);
    const double width = hull_hi - hull_lo;
    const double pad = width > 0.0 ? 0.02 * width : 0.5;
    const double A = hull_lo - pad - 1e-9 * (1.0 + std::abs(hull_lo));
    const double B = hull_hi + pad + 1e-9 * (1.0 + std::abs(hull_hi));

    StieltjesOptions sopt = opt.stieltjes;
    if (std::isnan(sopt.scan_lo)) sopt.scan_lo = A;
    if (std::isnan(sopt.scan_hi)) sopt.scan_hi = B;
    auto atoms = detect_atoms(g, sopt.scan_lo, sopt.scan_hi, sopt, ladder);

    InversionDiagnostics diag;
    const int M = std::max(64, sopt.scan_points);
    const double h = (B - A) / (M - 1);
    const double eps = ladder.back();
    auto rho = [&](double x) {
        const Complex z(x, eps);
        return -(g(z) - atoms_part(atoms, z)).imag() / kPi;
    };
    std::vector<double> r(static_cast<std::size_t>(M));
    parallel_for(r.size(), [&](std::size_t i) { r[i] = rho(A + h * static_cast<double>(i)); });
    const double peak = *std::max_element(r.begin(), r.end());
    if (!(peak > 1e-10)) return invert_on_grid(g, {}, ladder, std::move(atoms), sopt, diag);

    const double tau = 1e-6 * peak;
    std::size_t first = 0, last = r.size() - 1;
    while (r[first] <= tau) ++first;
    while (r[last] <= tau) --last;
    for (std::size_t i = first; i <= last; ++i)
        if (r[i] <= tau) diag.support_gaps = true;

    // Off the support ρ_ε is linear in ε; on it ρ_ε settles. Exact handles are probed far closer to the axis.
    const double e_edge = g.resolution() > 0.0 ? eps : 1e-12 * std::max(1.0, B - A);
    auto rho_eps = [&](double x, double e) {
        const Complex z(x, e);
        return -(g(z) - atoms_part(atoms, z)).imag() / kPi;
    };
    auto inside = [&](double x) {
        const double r1 = rho_eps(x, e_edge);
        const double r2 = rho_eps(x, 0.5 * e_edge);
        return r2 > 1e-14 * peak && r2 > 0.75 * r1;
    };
    auto edge = [&](double in, double out) {
        for (int it = 0; it < 100 && std::abs(in - out) > 1e-15 * (1.0 + std::abs(in)); ++it) {
            const double c = 0.5 * (in + out);
            if (inside(c)) in = c; else out = c;
        }
        return 0.5 * (in + out);
    };
    auto x_at = [&](std::size_t i) { return A + h * static_cast<double>(i); };
    std::size_t i_lo = first, i_hi = last;
    while (i_lo < last && !inside(x_at(i_lo))) ++i_lo;
    while (i_hi > i_lo && !inside(x_at(i_hi))) --i_hi;
    const double s_lo = i_lo == 0 ? A : edge(x_at(i_lo), x_at(i_lo - 1));
    const double s_hi = i_hi + 1 == r.size() ? B : edge(x_at(i_hi), x_at(i_hi + 1));
    diag.support_lo = s_lo;
    diag.support_hi = s_hi;
    std::size_t n = opt.n_nodes;
    for (int step = 0;; ++step, n *= 2) {
        const bool last_try = step >= opt.refinements;
        try {
            auto res = invert_on_grid(g, chebyshev_grid(s_lo, s_hi, n), ladder, atoms, sopt, diag);
            if (last_try || std::abs(res.diagnostics.normalization_defect) <= kNormTolerance) return res;
        } catch (const InversionError&) {
            if (last_try) throw;
        }
    }
}

}  // namespace freeprob
