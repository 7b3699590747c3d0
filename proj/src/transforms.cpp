#include "freeprob/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freeprob/errors.hpp"
#include "freeprob/newton.hpp"

namespace freeprob {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void reject_real_support_point(const SpectralMeasure& m, double x, const char* what)
{
    for (const auto& a : m.atoms()) {
        if (std::abs(x - a.location) <= 1e-14 * (1.0 + std::abs(a.location))) {
            std::ostringstream os;
            os.precision(17);
            os << what << ": pole at atom x=" << a.location;
            throw EvaluationError(os.str());
        }
    }
    if (const auto& ac = m.ac()) {
        if (x >= ac->support_lo && x <= ac->support_hi) {
            std::ostringstream os;
            os.precision(17);
            os << what << ": x=" << x << " lies on the density support";
            throw EvaluationError(os.str());
        }
    }
}

double handle_resolution(const SpectralMeasure& m)
{
    if (!m.ac() || m.chebyshev()) return 0.0;
    const auto& e = m.cell_edges();
    double h = 0.0;
    for (std::size_t i = 1; i < e.size(); ++i) h = std::max(h, e[i] - e[i - 1]);
    return 4.0 * h;
}

Complex seed_or(const InversionConfig& cfg, Complex fallback)
{
    return finite(cfg.seed_point) ? cfg.seed_point : fallback;
}

}  // namespace

Complex cauchy_G(const SpectralMeasure& m, Complex z)
{
    if (!finite(z)) throw DomainError("cauchy_G: non-finite argument");
    if (z.imag() == 0.0) reject_real_support_point(m, z.real(), "cauchy_G");
    Complex g = 0.0;
    for (const auto& a : m.atoms()) g += a.mass / (z - a.location);
    if (const auto& ac = m.ac()) {
        if (const auto* c = m.chebyshev()) {
            g += c->value(z);
        } else {
            const auto& w = m.weights();
            for (std::size_t i = 0; i < ac->nodes.size(); ++i) g += w[i] * ac->values[i] / (z - ac->nodes[i]);
        }
    }
    return g;
}

Complex cauchy_G_derivative(const SpectralMeasure& m, Complex z)
{
    if (!finite(z)) throw DomainError("cauchy_G_derivative: non-finite argument");
    if (z.imag() == 0.0) reject_real_support_point(m, z.real(), "cauchy_G_derivative");
    Complex g = 0.0;
    for (const auto& a : m.atoms()) {
        const Complex d = z - a.location;
        g -= a.mass / (d * d);
    }
    if (const auto& ac = m.ac()) {
        if (const auto* c = m.chebyshev()) {
            g += c->derivative(z);
        } else {
            const auto& w = m.weights();
            for (std::size_t i = 0; i < ac->nodes.size(); ++i) {
                const Complex d = z - ac->nodes[i];
                g -= w[i] * ac->values[i] / (d * d);
            }
        }
    }
    return g;
}

AnalyticFunctionHandle cauchy_handle(const SpectralMeasure& m)
{
    return AnalyticFunctionHandle([m](Complex z) { return cauchy_G(m, z); }, Domain::upper_half_plane(),
                                  HandleKind::Cauchy, [m](Complex z) { return cauchy_G_derivative(m, z); },
                                  handle_resolution(m));
}

Complex reciprocal_L(const SpectralMeasure& m, Complex z)
{
    const Complex g = cauchy_G(m, z);
    if (g == Complex(0.0)) throw EvaluationError("reciprocal_L: G vanished");
    return 1.0 / g;
}

Complex invert_L(const AnalyticFunctionHandle& G, Complex w, const InversionConfig& cfg)
{
    if (!(w.imag() > 0.0) || !finite(w)) throw DomainError("invert_L: w must lie in the upper half-plane");
    NewtonProblem p;
    p.f = [&](Complex z) { return 1.0 / G(z) - w; };
    p.df = [&](Complex z) {
        const Complex g = G(z);
        return -G.derivative(z) / (g * g);
    };
    p.admissible = [](Complex z) { return z.imag() > 0.0; };
    p.scale = std::abs(w);
    try {
        return damped_newton(p, seed_or(cfg, w), cfg.newton_tol, cfg.max_iter, "invert_L");
    } catch (const ConvergenceError& first) {
        // Raise the cone height and continue back down to w.
        double M = std::max(1.0, std::abs(w));
        for (int k = 1; k <= 10; ++k) {
            M *= 2.0;
            const int steps = 8 * k;
            try {
                Complex z = w + Complex(0.0, M);
                for (int j = 0; j <= steps; ++j) {
                    const double t = 1.0 - static_cast<double>(j) / steps;
                    const Complex wj = w + Complex(0.0, M * t * t);
                    NewtonProblem pj = p;
                    pj.f = [&, wj](Complex zz) { return 1.0 / G(zz) - wj; };
                    pj.scale = std::abs(wj);
                    z = damped_newton(pj, z, cfg.newton_tol, cfg.max_iter, "invert_L continuation");
                }
                return z;
            } catch (const ConvergenceError&) {
            }
        }
        throw ConvergenceError(std::string(first.what()) + " (cone height raised to 2^10 without success)",
                               first.trace());
    }
}

Complex invert_L(const SpectralMeasure& m, Complex w, const InversionConfig& cfg)
{
    InversionConfig c = cfg;
    if (!finite(c.seed_point)) c.seed_point = w + mean(m);
    if (!(c.seed_point.imag() > 0.0)) c.seed_point = w;
    return invert_L(cauchy_handle(m), w, c);
}

Complex voiculescu_phi(const AnalyticFunctionHandle& G, Complex z, const InversionConfig& cfg)
{
    return invert_L(G, z, cfg) - z;
}

Complex voiculescu_phi(const SpectralMeasure& m, Complex z, const InversionConfig& cfg)
{
    return invert_L(m, z, cfg) - z;
}

Complex r_transform(const SpectralMeasure& m, Complex w, const InversionConfig& cfg)
{
    if (!finite(w)) throw DomainError("r_transform: non-finite argument");
    if (w == Complex(0.0)) return mean(m);
    const Complex u = 1.0 / w;
    if (u.imag() > 0.0) return voiculescu_phi(m, u, cfg);
    if (u.imag() < 0.0) return std::conj(voiculescu_phi(m, std::conj(u), cfg));

    const double x = u.real();
    const double mu = mean(m);
    const bool right = x > mu;
    if ((right && x <= m.hull_hi()) || (!right && x >= m.hull_lo()))
        throw DomainError("r_transform: 1/w lies inside the support hull");
    NewtonProblem p;
    p.f = [&](Complex z) { return 1.0 / cauchy_G(m, z) - u; };
    p.df = [&](Complex z) {
        const Complex g = cauchy_G(m, z);
        return -cauchy_G_derivative(m, z) / (g * g);
    };
    p.admissible = [&](Complex z) {
        return z.imag() == 0.0 && (right ? z.real() > m.hull_hi() : z.real() < m.hull_lo());
    };
    p.scale = std::abs(u);
    Complex seed = seed_or(cfg, u + mu);
    if (!p.admissible(seed)) seed = right ? Complex(std::max(x, m.hull_hi()) + 1.0) : Complex(std::min(x, m.hull_lo()) - 1.0);
    return damped_newton(p, seed, cfg.newton_tol, cfg.max_iter, "r_transform") - u;
}

Complex r_transform(const AnalyticFunctionHandle& G, Complex w, const InversionConfig& cfg)
{
    if (!finite(w) || w == Complex(0.0)) throw DomainError("r_transform: w must be finite and non-zero");
    const Complex u = 1.0 / w;
    if (u.imag() > 0.0) return voiculescu_phi(G, u, cfg);
    if (u.imag() < 0.0) return std::conj(voiculescu_phi(G, std::conj(u), cfg));
    throw DomainError("r_transform: real 1/w needs a measure, not a handle");
}

std::vector<double> r_transform_cumulants(const SpectralMeasure& m, int n, double radius, const InversionConfig& cfg)
{
    if (n < 1) return {};
    const double mu = mean(m);
    const double spread = std::max(std::abs(m.hull_lo() - mu), std::abs(m.hull_hi() - mu));
    if (radius <= 0.0) radius = spread > 1e-12 ? 0.2 / spread : 1.0;
    const int N = 64;
    std::vector<Complex> acc(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < N; ++j) {
        const double th = 2.0 * std::numbers::pi * (j + 0.5) / N;
        const Complex e = std::polar(1.0, th);
        const Complex R = r_transform(m, radius * e, cfg);
        Complex scale = 1.0;
        for (int k = 0; k < n; ++k) {
            acc[static_cast<std::size_t>(k)] += R / scale;
            scale *= radius * e;
        }
    }
    std::vector<double> kappa(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) kappa[static_cast<std::size_t>(k)] = acc[static_cast<std::size_t>(k)].real() / N;
    return kappa;
}

Complex psi_transform(const SpectralMeasure& m, Complex z)
{
    if (!finite(z)) throw DomainError("psi_transform: non-finite argument");
    if (z == Complex(0.0)) return 0.0;
    if (z.imag() == 0.0) reject_real_support_point(m, 1.0 / z.real(), "psi_transform");
    return integrate(m, [z](double x) { return z * x / (1.0 - z * x); });
}

Complex psi_derivative(const SpectralMeasure& m, Complex z)
{
    if (!finite(z)) throw DomainError("psi_derivative: non-finite argument");
    if (z.imag() == 0.0 && z != Complex(0.0)) reject_real_support_point(m, 1.0 / z.real(), "psi_derivative");
    return integrate(m, [z](double x) {
        const Complex d = 1.0 - z * x;
        return x / (d * d);
    });
}

Complex psi_from_cauchy(const AnalyticFunctionHandle& G, Complex z)
{
    if (z == Complex(0.0)) return 0.0;
    const Complex zeta = 1.0 / z;
    if (zeta.imag() > 0.0) return zeta * G(zeta) - 1.0;
    if (zeta.imag() < 0.0) return std::conj(std::conj(zeta) * G(std::conj(zeta))) - 1.0;
    // real ζ off the support: G is real there, its value is the real part just above the axis
    const double h = 1e-7 * (1.0 + std::abs(zeta.real()));
    return zeta.real() * G(Complex(zeta.real(), h)).real() - 1.0;
}

AnalyticFunctionHandle psi_handle(const SpectralMeasure& m)
{
    return AnalyticFunctionHandle([m](Complex z) { return psi_transform(m, z); }, Domain::slit_plane(),
                                  HandleKind::Generic, [m](Complex z) { return psi_derivative(m, z); });
}

Complex chi_inverse(const AnalyticFunctionHandle& psi, Complex w, double zero_mass, double first_moment,
                    const InversionConfig& cfg)
{
    if (!finite(w) || w == Complex(0.0)) throw DomainError("chi_inverse: w must be finite and non-zero");
    const bool real = w.imag() == 0.0;
    if (real && !(w.real() > zero_mass - 1.0 && w.real() < 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "chi_inverse: w=" << w.real() << " outside (" << zero_mass - 1.0 << ", 0)";
        throw DomainError(os.str());
    }
    NewtonProblem p;
    p.f = [&](Complex z) { return psi(z) - w; };
    p.df = [&](Complex z) { return psi.derivative(z); };
    p.admissible = [&](Complex z) {
        if (real) return z.imag() == 0.0 && z.real() < 0.0;
        return psi.domain().contains(z);
    };
    p.scale = std::abs(w);
    const Complex seed = seed_or(cfg, first_moment > 0.0 ? w / first_moment : w);
    return damped_newton(p, seed, cfg.newton_tol, cfg.max_iter, "chi_inverse");
}

Complex chi_inverse(const SpectralMeasure& m, Complex w, const InversionConfig& cfg)
{
    return chi_inverse(psi_handle(m), w, m.mass_at(0.0).value_or(0.0), mean(m), cfg);
}

Complex s_transform(const AnalyticFunctionHandle& psi, Complex w, double zero_mass, double first_moment,
                    const InversionConfig& cfg)
{
    if (zero_mass >= 1.0 - 1e-12) throw DomainError("s_transform: undefined for the point mass at 0");
    if (w == Complex(0.0)) throw DomainError("s_transform: w = 0 excluded");
    return (1.0 + w) * chi_inverse(psi, w, zero_mass, first_moment, cfg) / w;
}

Complex s_transform(const SpectralMeasure& m, Complex w, const InversionConfig& cfg)
{
    return s_transform(psi_handle(m), w, m.mass_at(0.0).value_or(0.0), mean(m), cfg);
}

namespace {

// Coefficients 0..deg of M(z)^s where M(z) = 1 + Σ m_k z^k.
std::vector<double> truncated_power(const std::vector<double>& M, int s, int deg)
{
    std::vector<double> out(static_cast<std::size_t>(deg + 1), 0.0);
    out[0] = 1.0;
    for (int p = 0; p < s; ++p) {
        std::vector<double> next(out.size(), 0.0);
        for (int i = 0; i <= deg; ++i) {
            if (out[static_cast<std::size_t>(i)] == 0.0) continue;
            for (int j = 0; i + j <= deg; ++j)
                next[static_cast<std::size_t>(i + j)] += out[static_cast<std::size_t>(i)] * M[static_cast<std::size_t>(j)];
        }
        out = std::move(next);
    }
    return out;
}

}  // namespace

// m_n = Σ_{s=1}^{n} κ_s [z^{n−s}] M(z)^s, from M(z) = 1 + Σ κ_s z^s M(z)^s.
std::vector<double> free_cumulants(const std::vector<double>& moments, int n)
{
    if (n < 0 || static_cast<int>(moments.size()) < n) throw DomainError("free_cumulants: need at least n moments");
    std::vector<double> M(static_cast<std::size_t>(n + 1), 0.0);
    M[0] = 1.0;
    for (int k = 1; k <= n; ++k) M[static_cast<std::size_t>(k)] = moments[static_cast<std::size_t>(k - 1)];
    std::vector<double> kappa(static_cast<std::size_t>(n), 0.0);
    for (int k = 1; k <= n; ++k) {
        double rest = 0.0;
        for (int s = 1; s < k; ++s)
            rest += kappa[static_cast<std::size_t>(s - 1)] * truncated_power(M, s, k - s)[static_cast<std::size_t>(k - s)];
        kappa[static_cast<std::size_t>(k - 1)] = M[static_cast<std::size_t>(k)] - rest;
    }
    return kappa;
}

std::vector<double> moments_from_free_cumulants(const std::vector<double>& cumulants, int n)
{
    if (n < 0 || static_cast<int>(cumulants.size()) < n) throw DomainError("moments_from_free_cumulants: need n cumulants");
    std::vector<double> M(static_cast<std::size_t>(n + 1), 0.0);
    M[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        double v = 0.0;
        for (int s = 1; s <= k; ++s)
            v += cumulants[static_cast<std::size_t>(s - 1)] * truncated_power(M, s, k - s)[static_cast<std::size_t>(k - s)];
        M[static_cast<std::size_t>(k)] = v;
    }
    return std::vector<double>(M.begin() + 1, M.end());
}

}  // namespace freeprob
