#include "freeprob/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include "freeprob/errors.hpp"
#include "freeprob/families.hpp"
#include "freeprob/newton.hpp"
#include "freeprob/parallel.hpp"
#include "freeprob/transforms.hpp"

namespace freeprob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite(Complex v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

double resolution_of(const SpectralMeasure& m) { return cauchy_handle(m).resolution(); }

// G of a measure on ℂ∖ℝ, using conjugate symmetry below the axis.
Complex G_at(const SpectralMeasure& m, Complex z)
{
    if (z.imag() < 0.0) return std::conj(cauchy_G(m, std::conj(z)));
    return cauchy_G(m, z);
}

Complex dG_at(const SpectralMeasure& m, Complex z)
{
    if (z.imag() < 0.0) return std::conj(cauchy_G_derivative(m, std::conj(z)));
    return cauchy_G_derivative(m, z);
}

// h = L − z and its derivative.
struct AddH {
    const SpectralMeasure* m;
    Complex value(Complex w) const { return 1.0 / G_at(*m, w) - w; }
    Complex derivative(Complex w) const
    {
        const Complex g = G_at(*m, w);
        return -dG_at(*m, w) / (g * g) - 1.0;
    }
};

// h(w) = η(w)/w = 1/w − L(1/w) and its derivative.
struct MultH {
    const SpectralMeasure* m;
    Complex value(Complex w) const { return 1.0 / w - 1.0 / G_at(*m, 1.0 / w); }
    Complex derivative(Complex w) const
    {
        const Complex u = 1.0 / w;
        const Complex g = G_at(*m, u);
        const Complex dL = -dG_at(*m, u) / (g * g);
        return (dL - 1.0) * u * u;
    }
};

// ω = T(ω; z).
struct FixedPointMap {
    std::function<Complex(Complex, Complex)> T;
    std::function<Complex(Complex, Complex)> dT;
    std::function<bool(Complex, Complex)> admissible;
};

std::optional<Complex> plain_iteration(const FixedPointMap& m, Complex z, Complex w, double tol, int max_iter,
                                       std::vector<Complex>* trace)
{
    double prev = kInf;
    for (int k = 0; k < max_iter; ++k) {
        Complex t = m.T(w, z);
        if (!finite(t)) return std::nullopt;
        const double r = std::abs(t - w);
        if (r > prev) t = w + 0.5 * (t - w);
        for (int g = 0; g < 60 && !m.admissible(t, z); ++g) t = w + 0.5 * (t - w);
        if (!m.admissible(t, z)) return std::nullopt;
        if (trace) trace->push_back(t);
        w = t;
        if (r <= tol * (1.0 + std::abs(w))) return w;
        prev = r;
    }
    return std::nullopt;
}

std::optional<Complex> newton(const FixedPointMap& m, Complex z, Complex w, double tol, int max_iter)
{
    auto F = [&](Complex v) { return v - m.T(v, z); };
    Complex f = F(w);
    for (int it = 0; it < max_iter; ++it) {
        if (!finite(f)) return std::nullopt;
        if (std::abs(f) <= tol * (1.0 + std::abs(w))) return w;
        const Complex d = 1.0 - m.dT(w, z);
        if (!finite(d) || std::abs(d) == 0.0) return std::nullopt;
        Complex step = f / d;
        bool moved = false;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
            const Complex t = w - step;
            if (!m.admissible(t, z)) continue;
            const Complex ft = F(t);
            if (finite(ft) && std::abs(ft) < std::abs(f)) {
                w = t;
                f = ft;
                moved = true;
                break;
            }
        }
        if (!moved) return std::abs(f) <= 1e3 * tol * (1.0 + std::abs(w)) ? std::optional<Complex>(w) : std::nullopt;
    }
    return std::abs(f) <= tol * (1.0 + std::abs(w)) ? std::optional<Complex>(w) : std::nullopt;
}

// One thread-local warm start per solver; a converged admissible Newton iterate is the unique fixed point.
struct WarmStart {
    const void* owner = nullptr;
    Complex w;
};
thread_local WarmStart warm;

// Solves along a path z(y), y from y_start down to the target height, with Newton continuation.
class FixedPointSolver {
public:
    FixedPointSolver(FixedPointMap map, std::function<Complex(Complex, double)> path,
                     std::function<double(Complex)> target_height, std::function<double(Complex)> start_height,
                     double tol, int max_iter, std::string what)
        : map_(std::move(map)), path_(std::move(path)), target_height_(std::move(target_height)),
          start_height_(std::move(start_height)), tol_(tol), max_iter_(max_iter), what_(std::move(what))
    {
    }

    Complex solve(Complex z) const
    {
        constexpr double kNewtonTol = 1e-14;
        if (warm.owner == this) {
            if (auto w = newton(map_, z, warm.w, kNewtonTol, 12)) return remember(*w);
        }
        const double y_target = target_height_(z);
        const double y_start = start_height_(z);
        std::vector<Complex> trace;
        if (y_target >= y_start) {
            auto w = plain_iteration(map_, z, z, tol_, max_iter_, &trace);
            if (!w) fail(z, trace);
            return remember(newton(map_, z, *w, kNewtonTol, 8).value_or(*w));
        }
        Complex zy = path_(z, y_start);
        auto w = plain_iteration(map_, zy, zy, tol_, max_iter_, &trace);
        if (!w) fail(zy, trace);
        double y = y_start;
        while (y > y_target) {
            double next = std::max(y_target, 0.25 * y);
            std::optional<Complex> step;
            for (int refine = 0; refine < 12; ++refine) {
                step = newton(map_, path_(z, next), *w, kNewtonTol, 30);
                if (step) break;
                next = std::sqrt(next * y);
            }
            if (!step) {
                trace.clear();
                step = plain_iteration(map_, path_(z, next), *w, tol_, max_iter_, &trace);
                if (!step) fail(path_(z, next), trace);
            }
            w = step;
            y = next;
        }
        return remember(*w);
    }

    Complex T(Complex w, Complex z) const { return map_.T(w, z); }

private:
    Complex remember(Complex w) const
    {
        warm = {this, w};
        return w;
    }

    [[noreturn]] void fail(Complex z, const std::vector<Complex>& trace) const
    {
        std::ostringstream os;
        os << what_ << ": fixed point did not converge at z = " << z << " within " << max_iter_ << " iterations";
        throw ConvergenceError(os.str(), trace);
    }

    FixedPointMap map_;
    std::function<Complex(Complex, double)> path_;
    std::function<double(Complex)> target_height_;
    std::function<double(Complex)> start_height_;
    double tol_;
    int max_iter_;
    std::string what_;
};

double hull_scale(double lo, double hi) { return std::max({1.0, hi - lo, std::abs(lo), std::abs(hi)}); }

// ⊞ subordination: ω₁ = z + h_ν(z + h_μ(ω₁)).
class AdditiveSubordination {
public:
    AdditiveSubordination(SpectralMeasure mu, SpectralMeasure nu, double tol, int max_iter)
        : mu_(std::move(mu)), nu_(std::move(nu)), hm_{&mu_}, hn_{&nu_},
          solver_(make_map(), [](Complex z, double y) { return Complex(z.real(), y); },
                  [](Complex z) { return z.imag(); },
                  [s = std::max(hull_scale(mu_.hull_lo(), mu_.hull_hi()), hull_scale(nu_.hull_lo(), nu_.hull_hi()))](
                      Complex) { return s; },
                  tol, max_iter, "free_add")
    {
    }

    struct Point {
        Complex w1, w2;
    };

    Point at(Complex z) const
    {
        if (!(z.imag() > 0.0)) throw DomainError("free_add: subordination evaluated off the upper half-plane");
        const Complex w1 = solver_.solve(z);
        return {w1, z + hm_.value(w1)};
    }

    Complex omega1_derivative(Complex z) const
    {
        const auto p = at(z);
        const Complex a = hm_.derivative(p.w1), b = hn_.derivative(p.w2);
        return (1.0 + b) / (1.0 - a * b);
    }

    Complex omega2_derivative(Complex z) const
    {
        const auto p = at(z);
        return 1.0 + hm_.derivative(p.w1) * omega1_derivative(z);
    }

    Complex G(Complex z) const { return G_at(mu_, at(z).w1); }
    Complex dG(Complex z) const { return dG_at(mu_, at(z).w1) * omega1_derivative(z); }

    const SpectralMeasure& mu() const { return mu_; }
    const SpectralMeasure& nu() const { return nu_; }

private:
    FixedPointMap make_map() const
    {
        return {[this](Complex w, Complex z) { return z + hn_.value(z + hm_.value(w)); },
                [this](Complex w, Complex z) { return hn_.derivative(z + hm_.value(w)) * hm_.derivative(w); },
                [this](Complex w, Complex z) { return w.imag() > 0.0 && (z + hm_.value(w)).imag() > 0.0; }};
    }

    SpectralMeasure mu_, nu_;
    AddH hm_, hn_;
    FixedPointSolver solver_;
};

// ⊞-power subordination: ω = z + (t − 1)h_μ(ω).
class PowerSubordination {
public:
    PowerSubordination(SpectralMeasure mu, double t, double tol, int max_iter)
        : mu_(std::move(mu)), t_(t), hm_{&mu_},
          solver_(make_map(), [](Complex z, double y) { return Complex(z.real(), y); },
                  [](Complex z) { return z.imag(); },
                  [s = t * hull_scale(mu_.hull_lo(), mu_.hull_hi())](Complex) { return s; }, tol, max_iter,
                  "free_add_power")
    {
    }

    Complex omega(Complex z) const
    {
        if (!(z.imag() > 0.0)) throw DomainError("free_add_power: subordination evaluated off the upper half-plane");
        return solver_.solve(z);
    }
    Complex omega_derivative(Complex z) const { return 1.0 / (1.0 - (t_ - 1.0) * hm_.derivative(omega(z))); }
    Complex G(Complex z) const { return G_at(mu_, omega(z)); }
    Complex dG(Complex z) const
    {
        const Complex w = omega(z);
        return dG_at(mu_, w) / (1.0 - (t_ - 1.0) * hm_.derivative(w));
    }

private:
    FixedPointMap make_map() const
    {
        return {[this](Complex w, Complex z) { return z + (t_ - 1.0) * hm_.value(w); },
                [this](Complex w, Complex) { return (t_ - 1.0) * hm_.derivative(w); },
                [](Complex w, Complex) { return w.imag() > 0.0; }};
    }

    SpectralMeasure mu_;
    double t_;
    AddH hm_;
    FixedPointSolver solver_;
};

// ⊠ subordination in η-form: ω₁ = z·h_ν(z·h_μ(ω₁)), ψ_{μ⊠ν} = ψ_μ∘ω₁, on ℂ∖ℝ₊.
class MultiplicativeSubordination {
public:
    MultiplicativeSubordination(SpectralMeasure mu, SpectralMeasure nu, double tol, int max_iter)
        : mu_(std::move(mu)), nu_(std::move(nu)), hm_{&mu_}, hn_{&nu_},
          scale_(std::max(1.0, mu_.hull_hi() * nu_.hull_hi())),
          solver_(make_map(),
                  // z = conj(1/ζ) with ζ = Re ζ₀ + iy, ζ₀ = conj(1/z).
                  [](Complex z, double y) {
                      const Complex zeta0 = std::conj(1.0 / z);
                      return std::conj(1.0 / Complex(zeta0.real(), y));
                  },
                  [](Complex z) { return std::conj(1.0 / z).imag(); },
                  [this](Complex z) { return std::max(2.0 * std::abs(std::conj(1.0 / z).real()), scale_); }, tol,
                  max_iter, "free_mult")
    {
    }

    // ω₁ on ℂ∖[0,∞).
    Complex omega(Complex z) const
    {
        if (z.imag() < 0.0) return std::conj(omega(std::conj(z)));
        if (z.imag() == 0.0) {
            if (!(z.real() < 0.0)) throw DomainError("free_mult: subordination evaluated on [0, inf)");
            return real_omega(z.real());
        }
        return solver_.solve(z);
    }

    Complex omega_derivative(Complex z) const
    {
        const Complex w1 = omega(z);
        const Complex w2 = z * hm_.value(w1);
        const Complex num = hn_.value(w2) + z * hn_.derivative(w2) * hm_.value(w1);
        const Complex den = 1.0 - z * z * hn_.derivative(w2) * hm_.derivative(w1);
        return num / den;
    }

    Complex psi_mu(Complex w) const { return G_at(mu_, 1.0 / w) / w - 1.0; }
    Complex psi_mu_derivative(Complex w) const
    {
        const Complex u = 1.0 / w;
        return -dG_at(mu_, u) * u * u * u - G_at(mu_, u) * u * u;
    }

    Complex psi(Complex z) const { return psi_mu(omega(z)); }
    Complex psi_derivative(Complex z) const { return psi_mu_derivative(omega(z)) * omega_derivative(z); }

    // G_{μ⊠ν}(ζ) = (1 + ψ(1/ζ))/ζ.
    Complex G(Complex zeta) const { return (1.0 + psi(1.0 / zeta)) / zeta; }
    Complex dG(Complex zeta) const
    {
        const Complex z = 1.0 / zeta;
        return -(1.0 + psi(z)) * z * z - psi_derivative(z) * z * z * z;
    }

private:
    Complex real_omega(double z) const
    {
        FixedPointMap map = make_map();
        map.admissible = [](Complex w, Complex) { return w.real() < 0.0; };
        std::vector<Complex> trace;
        auto w = plain_iteration(map, z, z, 1e-15, 2000, &trace);
        if (!w) {
            trace.clear();
            w = newton(map, z, z, 1e-14, 100);
        }
        if (!w) throw ConvergenceError("free_mult: fixed point did not converge on the negative axis", trace);
        return {w->real(), 0.0};
    }

    FixedPointMap make_map() const
    {
        return {[this](Complex w, Complex z) { return z * hn_.value(z * hm_.value(w)); },
                [this](Complex w, Complex z) { return z * hn_.derivative(z * hm_.value(w)) * z * hm_.derivative(w); },
                [this](Complex w, Complex z) { return w.imag() > 0.0 && (z * hm_.value(w)).imag() > 0.0; }};
    }

    SpectralMeasure mu_, nu_;
    MultH hm_, hn_;
    double scale_;
    FixedPointSolver solver_;
};

RecoveryOptions convolution_recovery(const FixedPointConfig& cfg, std::vector<double> candidates)
{
    RecoveryOptions opt = cfg.recovery;
    opt.stieltjes.allow_renormalization = true;
    opt.stieltjes.atom_candidates.insert(opt.stieltjes.atom_candidates.end(), candidates.begin(), candidates.end());
    return opt;
}

void check_grid(const FixedPointConfig& cfg)
{
    if (!(cfg.tol > 0.0)) throw DomainError("FixedPointConfig: tol must be positive");
    if (cfg.max_iter <= 0) throw DomainError("FixedPointConfig: max_iter must be positive");
    for (Complex z : cfg.verification_grid)
        if (!(z.imag() > 0.0)) throw DomainError("FixedPointConfig: verification grid must lie in the upper half-plane");
}

double zero_mass(const SpectralMeasure& m) { return m.mass_at(0.0).value_or(0.0); }

}  // namespace

std::vector<Complex> default_verification_grid()
{
    std::vector<Complex> g;
    for (double y : {0.5, 1.0, 2.0})
        for (int x = -2; x <= 2; ++x) g.emplace_back(static_cast<double>(x), y);
    return g;
}

std::vector<double> default_s_grid()
{
    std::vector<double> w;
    for (int k = 0; k < 9; ++k) w.push_back(-0.45 + 0.05 * k);
    return w;
}

FreeAddition free_add(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg)
{
    check_grid(cfg);
    auto sub = std::make_shared<const AdditiveSubordination>(mu, nu, cfg.tol, cfg.max_iter);
    const double res = std::max(resolution_of(mu), resolution_of(nu));

    AnalyticFunctionHandle omega1([sub](Complex z) { return sub->at(z).w1; }, Domain::upper_half_plane(),
                                  HandleKind::Generic, [sub](Complex z) { return sub->omega1_derivative(z); }, res);
    AnalyticFunctionHandle omega2([sub](Complex z) { return sub->at(z).w2; }, Domain::upper_half_plane(),
                                  HandleKind::Generic, [sub](Complex z) { return sub->omega2_derivative(z); }, res);
    AnalyticFunctionHandle g([sub](Complex z) { return sub->G(z); }, Domain::upper_half_plane(), HandleKind::Cauchy,
                             [sub](Complex z) { return sub->dG(z); }, res);

    SubordinationPair pair{omega1, omega2, 0.0};
    pair.residual_sup = subordination_residual(pair, mu, nu, cfg.verification_grid);
    if (!(pair.residual_sup <= cfg.tol)) {
        std::ostringstream os;
        os << "free_add: subordination residual " << pair.residual_sup << " exceeds tol " << cfg.tol;
        throw ConvergenceError(os.str(), {});
    }

    std::vector<double> candidates;
    for (const auto& a : mu.atoms())
        for (const auto& b : nu.atoms())
            if (a.mass + b.mass > 1.0) candidates.push_back(a.location + b.location);
    auto r = recover_measure(g, mu.hull_lo() + nu.hull_lo(), mu.hull_hi() + nu.hull_hi(),
                             convolution_recovery(cfg, candidates));
    FreeAddition out{{r.measure, g, r.diagnostics}, pair};
    return out;
}

FreePower free_add_power(const SpectralMeasure& mu, double t, const FixedPointConfig& cfg)
{
    if (!(t >= 1.0) || !std::isfinite(t)) throw DomainError("free_add_power: t must be >= 1");
    check_grid(cfg);
    if (t == 1.0) {
        AnalyticFunctionHandle id([](Complex z) { return z; }, Domain::upper_half_plane(), HandleKind::Generic,
                                  [](Complex) { return Complex(1.0); });
        return {{mu, cauchy_handle(mu), InversionDiagnostics{}}, id};
    }
    auto sub = std::make_shared<const PowerSubordination>(mu, t, cfg.tol, cfg.max_iter);
    const double res = resolution_of(mu);
    AnalyticFunctionHandle omega([sub](Complex z) { return sub->omega(z); }, Domain::upper_half_plane(),
                                 HandleKind::Generic, [sub](Complex z) { return sub->omega_derivative(z); }, res);
    AnalyticFunctionHandle g([sub](Complex z) { return sub->G(z); }, Domain::upper_half_plane(), HandleKind::Cauchy,
                             [sub](Complex z) { return sub->dG(z); }, res);

    std::vector<double> candidates;
    for (const auto& a : mu.atoms())
        if (t * a.mass - (t - 1.0) > 0.0) candidates.push_back(t * a.location);
    auto r = recover_measure(g, t * mu.hull_lo(), t * mu.hull_hi(), convolution_recovery(cfg, candidates));
    return {{r.measure, g, r.diagnostics}, omega};
}

ConvolutionResult boolean_power(const SpectralMeasure& mu, double t, const FixedPointConfig& cfg)
{
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("boolean_power: t must lie in (0, 1]");
    if (t == 1.0) return {mu, cauchy_handle(mu), InversionDiagnostics{}};
    auto m = std::make_shared<const SpectralMeasure>(mu);
    auto L = [m, t](Complex z) { return (1.0 - t) * z + t / G_at(*m, z); };
    AnalyticFunctionHandle g([L](Complex z) { return 1.0 / L(z); }, Domain::upper_half_plane(), HandleKind::Cauchy,
                             [m, t, L](Complex z) {
                                 const Complex gm = G_at(*m, z);
                                 const Complex dL = (1.0 - t) - t * dG_at(*m, z) / (gm * gm);
                                 const Complex l = L(z);
                                 return -dL / (l * l);
                             },
                             resolution_of(mu));
    const double lo = std::min(mu.hull_lo(), t * mu.hull_lo());
    const double hi = std::max(mu.hull_hi(), t * mu.hull_hi());
    std::vector<double> candidates;
    for (const auto& a : mu.atoms()) candidates.push_back(t * a.location);
    auto r = recover_measure(g, lo, hi, convolution_recovery(cfg, candidates));
    return {r.measure, g, r.diagnostics};
}

ConvolutionResult monotone_add(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg)
{
    auto m = std::make_shared<const SpectralMeasure>(mu);
    auto n = std::make_shared<const SpectralMeasure>(nu);
    // Im L_ν(z) ≥ Im z; rounding can push L_ν(z) below the axis when it lands on the support of μ
    auto L_nu = [n](Complex z) {
        const Complex l = 1.0 / G_at(*n, z);
        return Complex(l.real(), std::max(l.imag(), z.imag()));
    };
    AnalyticFunctionHandle g([m, L_nu](Complex z) { return G_at(*m, L_nu(z)); }, Domain::upper_half_plane(),
                             HandleKind::Cauchy,
                             [m, n, L_nu](Complex z) {
                                 const Complex gn = G_at(*n, z);
                                 const Complex dL = -dG_at(*n, z) / (gn * gn);
                                 return dG_at(*m, L_nu(z)) * dL;
                             },
                             std::max(resolution_of(mu), resolution_of(nu)));
    std::vector<double> candidates;
    for (const auto& a : mu.atoms())
        for (const auto& b : nu.atoms()) candidates.push_back(a.location + b.location);
    // the earlier variable acts through a projection, so its spectrum is taken together with 0
    auto r = recover_measure(g, std::min(mu.hull_lo(), 0.0) + nu.hull_lo(), std::max(mu.hull_hi(), 0.0) + nu.hull_hi(),
                             convolution_recovery(cfg, candidates));
    return {r.measure, g, r.diagnostics};
}

ProductTransforms free_mult_transforms(const SpectralMeasure& mu, const SpectralMeasure& nu,
                                       const FixedPointConfig& cfg)
{
    check_grid(cfg);
    for (const auto* m : {&mu, &nu}) {
        if (m->hull_lo() < -1e-12) throw DomainError("free_mult: support must be non-negative");
        if (zero_mass(*m) >= 1.0 - 1e-12) throw DomainError("free_mult: delta_0 has no S-transform");
    }
    auto sub = std::make_shared<const MultiplicativeSubordination>(mu, nu, cfg.tol, cfg.max_iter);
    const double res = std::max(resolution_of(mu), resolution_of(nu));

    AnalyticFunctionHandle F([sub](Complex z) { return sub->omega(z); }, Domain::slit_plane(), HandleKind::Generic,
                             [sub](Complex z) { return sub->omega_derivative(z); }, res);
    AnalyticFunctionHandle psi([sub](Complex z) { return sub->psi(z); }, Domain::slit_plane(), HandleKind::Generic,
                               [sub](Complex z) { return sub->psi_derivative(z); }, res);
    AnalyticFunctionHandle g([sub](Complex z) { return sub->G(z); }, Domain::upper_half_plane(), HandleKind::Cauchy,
                             [sub](Complex z) { return sub->dG(z); }, res);

    auto S_of = [](const SpectralMeasure& m) {
        auto mm = std::make_shared<const SpectralMeasure>(m);
        return std::function<Complex(Complex)>([mm](Complex w) {
            return has_closed_form_S(*mm) ? closed_form_S(*mm, w) : s_transform(*mm, w);
        });
    };
    auto S_mu = S_of(mu), S_nu = S_of(nu);
    AnalyticFunctionHandle s_product([S_mu, S_nu](Complex w) { return S_mu(w) * S_nu(w); }, Domain::omega_image());

    ProductTransforms out{g, psi, F, s_product};
    out.mass_at_zero = std::max(zero_mass(mu), zero_mass(nu));
    out.mean = mean(mu) * mean(nu);

    // S of the subordination path against the product of S-transforms.
    const auto grid = default_s_grid();
    std::vector<double> s_err(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) {
        const double w = grid[i];
        if (w <= out.mass_at_zero - 1.0) return;
        const Complex s_sub = s_transform(psi, w, out.mass_at_zero, out.mean);
        s_err[i] = std::abs(s_sub - s_product(w));
    });
    out.s_residual = *std::max_element(s_err.begin(), s_err.end());

    // ψ from inverting χ = S·w/(1 + w) against ψ_μ∘F on the negative axis.
    const double lo_w = out.mass_at_zero - 1.0;
    auto psi_from_S = [&](double z) {
        NewtonProblem p;
        p.f = [&](Complex w) { return s_product(w) * w / (1.0 + w) - z; };
        p.df = [&](Complex w) {
            const double h = 1e-7 * (1.0 + std::abs(w));
            return (s_product(w + h) * (w + h) / (1.0 + w + h) - s_product(w - h) * (w - h) / (1.0 + w - h)) /
                   (2.0 * h);
        };
        p.admissible = [lo_w](Complex w) { return w.real() > lo_w && w.real() < 0.0; };
        p.scale = std::abs(z);
        const double seed = std::max(0.5 * lo_w, std::min(-1e-6, out.mean * z / (1.0 - out.mean * z)));
        return damped_newton(p, Complex(seed, 0.0), 1e-14, 200, "free_mult: chi inversion");
    };
    const double zs[] = {-0.1, -0.3, -1.0, -3.0, -10.0};
    for (double z0 : zs) {
        const double z = z0 / std::max(1e-12, out.mean);
        out.psi_residual = std::max(out.psi_residual, std::abs(psi_from_S(z) - psi(Complex(z, 0.0))));
    }

    return out;
}

FreeProduct free_mult(const SpectralMeasure& mu, const SpectralMeasure& nu, const FixedPointConfig& cfg)
{
    FreeProduct out{free_mult_transforms(mu, nu, cfg), SpectralMeasure::point_mass(0.0), InversionDiagnostics{}};
    std::vector<double> candidates;
    if (out.mass_at_zero > 0.0) candidates.push_back(0.0);
    for (const auto& a : mu.atoms())
        for (const auto& b : nu.atoms())
            if (a.mass + b.mass > 1.0) candidates.push_back(a.location * b.location);
    auto r = recover_measure(out.cauchy, std::max(0.0, mu.hull_lo()) * std::max(0.0, nu.hull_lo()),
                             mu.hull_hi() * nu.hull_hi(), convolution_recovery(cfg, candidates));
    out.law = r.measure;
    out.recovery = r.diagnostics;
    return out;
}

double subordination_residual(const SubordinationPair& pair, const SpectralMeasure& mu, const SpectralMeasure& nu,
                              const std::vector<Complex>& grid)
{
    std::vector<double> r(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) {
        const Complex z = grid[i];
        r[i] = std::abs(G_at(nu, pair.omega2(z)) - G_at(mu, pair.omega1(z)));
    });
    return grid.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

SubordinationDiagnostics subordination_diagnostics(const SubordinationPair& pair, const SpectralMeasure& mu,
                                                   const SpectralMeasure& nu, const std::vector<Complex>& grid)
{
    SubordinationDiagnostics d;
    d.residual_sup = subordination_residual(pair, mu, nu, grid);
    d.min_im_gain = kInf;
    for (Complex z : grid) {
        d.min_im_gain = std::min(d.min_im_gain, pair.omega1(z).imag() - z.imag());
        d.min_im_gain = std::min(d.min_im_gain, pair.omega2(z).imag() - z.imag());
    }
    if (grid.empty()) d.min_im_gain = 0.0;
    d.im_growth_ok = d.min_im_gain >= -1e-12;
    const Complex iy(0.0, 1e3);
    d.slope_error = std::abs(pair.omega1(iy) / iy - 1.0);
    d.slope_ok = d.slope_error < 0.01;
    return d;
}

}  // namespace freeprob
