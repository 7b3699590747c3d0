#include "freeprob/families.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "freeprob/errors.hpp"
#include "freeprob/inversion.hpp"
#include "freeprob/transforms.hpp"

namespace freeprob {

namespace {

constexpr double kPi = std::numbers::pi;
const std::vector<double> kAtomLadder{1e-8, 5e-9, 2.5e-9};

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Density √((x−lo)(hi−x))·f(x) on Chebyshev nodes. A pole of f just outside the support makes the
// density spike at an edge; the grid is refined until its mass matches 1 − Σ atoms, then rescaled.
DensityGrid edge_density(double lo, double hi, std::size_t n_nodes, const std::function<double(double)>& f,
                         double ac_mass)
{
    constexpr std::size_t kMaxRefine = 16;
    DensityGrid g;
    double mass = 0.0;
    for (std::size_t n = n_nodes;; n *= 2) {
        g = DensityGrid{lo, hi, chebyshev_nodes(lo, hi, n), {}};
        g.values.reserve(n);
        for (double x : g.nodes) g.values.push_back(std::sqrt(std::max(0.0, (x - lo) * (hi - x))) * f(x));
        const auto w = angle_midpoint_weights(g);
        mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) mass += w[i] * g.values[i];
        if (std::abs(mass - ac_mass) <= 1e-8 || n >= kMaxRefine * n_nodes) break;
    }
    if (mass > 0.0 && ac_mass > 0.0)
        for (double& v : g.values) v *= ac_mass / mass;
    return g;
}

double atom_total(const std::vector<Atom>& atoms)
{
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    return m;
}

// Square root of 1 − u continuous from u = 0; exact on |u| < 1 with the principal branch.
Complex sqrt_one_minus(Complex u) { return std::sqrt(1.0 - u); }

// Meixner G valid on ℂ minus the support, by the rationalised closed form.
Complex meixner_G_any(const MeixnerParams& p, Complex z)
{
    if (p.b == -1.0) return (z - p.a) / (z * z - p.a * z - 1.0);
    const double c = std::sqrt(1.0 + p.b);
    const Complex s = std::sqrt(z - p.a - 2.0 * c) * std::sqrt(z - p.a + 2.0 * c);
    return 2.0 * (1.0 + p.b) / ((1.0 + 2.0 * p.b) * z + p.a + s);
}

Complex meixner_G_any_derivative(const MeixnerParams& p, Complex z)
{
    if (p.b == -1.0) {
        const Complex d = z * z - p.a * z - 1.0;
        return (d - (z - p.a) * (2.0 * z - p.a)) / (d * d);
    }
    const double c = std::sqrt(1.0 + p.b);
    const Complex s = std::sqrt(z - p.a - 2.0 * c) * std::sqrt(z - p.a + 2.0 * c);
    const Complex D = (1.0 + 2.0 * p.b) * z + p.a + s;
    return -2.0 * (1.0 + p.b) * ((1.0 + 2.0 * p.b) + (z - p.a) / s) / (D * D);
}

// |L(z + φ) − z| with L the reciprocal of the closed-form G.
double inverse_residual(const MeixnerParams& p, Complex z, Complex phi)
{
    const Complex t = z + phi;
    if (t.imag() == 0.0) {
        const double c = p.b > -1.0 ? std::sqrt(1.0 + p.b) : 0.0;
        if (t.real() >= p.a - 2.0 * c && t.real() <= p.a + 2.0 * c) return std::numeric_limits<double>::infinity();
    }
    const Complex g = meixner_G_any(p, t);
    return std::abs(1.0 / g - z);
}

Complex numeric_phi(const MeixnerParams& p, Complex z)
{
    InversionConfig cfg;
    cfg.seed_point = z;
    return voiculescu_phi(meixner_cauchy_handle(p), z, cfg);
}

Complex numeric_R(const MeixnerParams& p, Complex w)
{
    const Complex u = 1.0 / w;
    if (u.imag() > 0.0) return numeric_phi(p, u);
    if (u.imag() < 0.0) return std::conj(numeric_phi(p, std::conj(u)));
    return r_transform(meixner_measure(p), w);
}

}  // namespace

void check_admissible(const MeixnerParams& p)
{
    if (!std::isfinite(p.a) || !std::isfinite(p.b) || p.b < -1.0) {
        std::ostringstream os;
        os << "free Meixner parameters need b >= -1 (got a=" << p.a << ", b=" << p.b << ")";
        throw InadmissibleError(os.str());
    }
}

void check_admissible(const MarchenkoPasturParams& p)
{
    if (!std::isfinite(p.lambda) || !std::isfinite(p.alpha) || p.lambda < 0.0 || p.alpha <= 0.0) {
        std::ostringstream os;
        os << "free Poisson parameters need lambda >= 0 and alpha > 0 (got " << p.lambda << ", " << p.alpha << ")";
        throw InadmissibleError(os.str());
    }
}

void check_admissible(const FreeBinomialParams& p)
{
    const double s = p.sigma, t = p.theta;
    if (!std::isfinite(s) || !std::isfinite(t) || s + t == 1.0 || !((s + t) / (s + t - 1.0) > 0.0) ||
        !(s * t / (s + t - 1.0) > 0.0)) {
        std::ostringstream os;
        os << "free binomial parameters (" << s << ", " << t << ") outside the admissible set";
        throw InadmissibleError(os.str());
    }
    if (!(s > 0.0 && t > 0.0)) {
        std::ostringstream os;
        os << "free binomial parameters (" << s << ", " << t
           << ") satisfy the admissibility inequalities but give no probability law on [0, 1]";
        throw InadmissibleError(os.str());
    }
}

Complex meixner_G(const MeixnerParams& p, Complex z)
{
    check_admissible(p);
    if (!(z.imag() > 0.0) || !finite(z)) throw DomainError("meixner_G: z must lie in the upper half-plane");
    const Complex g = meixner_G_any(p, z);
    if (g.imag() > 1e-12 * std::abs(g)) {
        std::ostringstream os;
        os.precision(17);
        os << "meixner_G: branch violation at z=" << z << " (Im G = " << g.imag() << ")";
        throw BranchError(os.str());
    }
    return g;
}

Complex meixner_G_derivative(const MeixnerParams& p, Complex z)
{
    check_admissible(p);
    return meixner_G_any_derivative(p, z);
}

AnalyticFunctionHandle meixner_cauchy_handle(const MeixnerParams& p)
{
    check_admissible(p);
    return AnalyticFunctionHandle([p](Complex z) { return meixner_G(p, z); }, Domain::upper_half_plane(),
                                  HandleKind::Cauchy, [p](Complex z) { return meixner_G_any_derivative(p, z); });
}

Complex meixner_quadratic_residual(const MeixnerParams& p, Complex z, Complex G)
{
    return (1.0 + z * p.a + p.b * z * z) * G * G - (z + p.a + 2.0 * p.b * z) * G + 1.0 + p.b;
}

SpectralMeasure meixner_measure(const MeixnerParams& p, std::size_t n_nodes)
{
    check_admissible(p);
    const auto handle = meixner_cauchy_handle(p);
    std::vector<Atom> atoms;
    std::optional<DensityGrid> ac;
    double lo = 0.0, hi = 0.0;
    const bool has_ac = p.b > -1.0;
    if (has_ac) {
        const double c = std::sqrt(1.0 + p.b);
        lo = p.a - 2.0 * c;
        hi = p.a + 2.0 * c;
    }

    // Real roots of bx² + ax + 1 (for b = −1 the law is purely atomic at roots of x² − ax − 1).
    std::vector<double> roots;
    if (p.b != 0.0) {
        const double disc = p.a * p.a - 4.0 * p.b;
        if (disc >= 0.0) {
            const double q = -0.5 * (p.a + std::copysign(std::sqrt(disc), p.a == 0.0 ? 1.0 : p.a));
            roots.push_back(q / p.b);
            if (q != 0.0) roots.push_back(1.0 / q);
        }
    } else if (p.a != 0.0) {
        roots.push_back(-1.0 / p.a);
    }
    for (double r : roots) {
        if (has_ac) {
            const double tol = 1e-9 * (1.0 + std::abs(r));
            if (std::abs(r - lo) <= tol || std::abs(r - hi) <= tol) continue;
            if (r > lo && r < hi) continue;
        }
        const double mass = atom_mass_at(handle, r, kAtomLadder);
        if (mass > 1e-12) atoms.push_back({r, mass});
    }
    if (has_ac)
        ac = edge_density(lo, hi, n_nodes, [p](double x) { return 1.0 / (2.0 * kPi * (p.b * x * x + p.a * x + 1.0)); },
                          1.0 - atom_total(atoms));
    return SpectralMeasure(std::move(atoms), std::move(ac), FamilyLabel{p});
}

Complex meixner_phi(const MeixnerParams& p, Complex z, BranchRecord* record)
{
    check_admissible(p);
    const Complex d = z - p.a;
    const Complex u = 4.0 * p.b / (d * d);
    Complex closed = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(u) < 1.0 && d != Complex(0.0)) {
        closed = 2.0 / (d * (1.0 + sqrt_one_minus(u)));
        if (inverse_residual(p, z, closed) <= 1e-9 * (1.0 + std::abs(z))) {
            if (record) *record = {true, 0.0};
            return closed;
        }
    }
    const Complex phi = numeric_phi(p, z);
    if (record) *record = {false, finite(closed) ? std::abs(phi - closed) : 0.0};
    return phi;
}

Complex meixner_R(const MeixnerParams& p, Complex w, BranchRecord* record)
{
    check_admissible(p);
    if (w == Complex(0.0)) {
        if (record) *record = {true, 0.0};
        return 0.0;
    }
    const Complex u = 1.0 - p.a * w;
    const Complex v = 4.0 * p.b * w * w / (u * u);
    Complex closed = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(v) < 1.0 && u != Complex(0.0)) {
        closed = (w / u) * 2.0 / (1.0 + sqrt_one_minus(v));
        if (inverse_residual(p, 1.0 / w, closed) <= 1e-9 * (1.0 + std::abs(1.0 / w))) {
            if (record) *record = {true, 0.0};
            return closed;
        }
    }
    const Complex R = numeric_R(p, w);
    if (record) *record = {false, finite(closed) ? std::abs(R - closed) : 0.0};
    return R;
}

std::vector<BranchVariant> audit_meixner_phi(const MeixnerParams& p, Complex z)
{
    check_admissible(p);
    if (p.b == 0.0) throw DomainError("audit_meixner_phi: the quadratic form degenerates at b = 0");
    const Complex ref = numeric_phi(p, z);
    std::vector<BranchVariant> out;
    for (int sr : {1, -1}) {
        for (int sa : {1, -1}) {
            const Complex e = z + static_cast<double>(sa) * p.a;
            const Complex root = e * sqrt_one_minus(4.0 * p.b / (e * e));
            const Complex v = (z - p.a + static_cast<double>(sr) * root) / (2.0 * p.b);
            out.push_back({sr, sa, v, std::abs(v - ref)});
        }
    }
    return out;
}

std::vector<BranchVariant> audit_meixner_R(const MeixnerParams& p, Complex w)
{
    check_admissible(p);
    if (p.b == 0.0) throw DomainError("audit_meixner_R: the quadratic form degenerates at b = 0");
    const Complex ref = numeric_R(p, w);
    std::vector<BranchVariant> out;
    for (int sr : {1, -1}) {
        for (int sa : {1, -1}) {
            const Complex e = 1.0 + static_cast<double>(sa) * p.a * w;
            const Complex root = e * sqrt_one_minus(4.0 * p.b * w * w / (e * e));
            const Complex v = (1.0 - p.a * w + static_cast<double>(sr) * root) / (2.0 * p.b * w);
            out.push_back({sr, sa, v, std::abs(v - ref)});
        }
    }
    return out;
}

SpectralMeasure mp_measure(const MarchenkoPasturParams& p, std::size_t n_nodes)
{
    check_admissible(p);
    if (p.lambda == 0.0) return SpectralMeasure({Atom{0.0, 1.0}}, std::nullopt, FamilyLabel{p});
    std::vector<Atom> atoms;
    if (p.lambda < 1.0) atoms.push_back({0.0, 1.0 - p.lambda});
    const double r = std::sqrt(p.lambda);
    const double lo = p.alpha * (1.0 - r) * (1.0 - r);
    const double hi = p.alpha * (1.0 + r) * (1.0 + r);
    auto g = edge_density(lo, hi, n_nodes, [&p](double x) { return 1.0 / (2.0 * kPi * p.alpha * x); },
                          1.0 - atom_total(atoms));
    return SpectralMeasure(std::move(atoms), std::move(g), FamilyLabel{p});
}

Complex mp_S(const MarchenkoPasturParams& p, Complex w)
{
    check_admissible(p);
    const Complex d = p.alpha * p.lambda + p.alpha * w;
    if (d == Complex(0.0)) throw EvaluationError("mp_S: pole at w = -lambda");
    return 1.0 / d;
}

BinomialSupport binomial_support(const FreeBinomialParams& p)
{
    check_admissible(p);
    const double n = p.sigma + p.theta;
    const double u = std::sqrt(p.sigma / n * (1.0 - 1.0 / n));
    const double v = std::sqrt(1.0 / n * (1.0 - p.sigma / n));
    return {(u - v) * (u - v), (u + v) * (u + v)};
}

SpectralMeasure binomial_measure(const FreeBinomialParams& p, std::size_t n_nodes)
{
    const auto sup = binomial_support(p);
    std::vector<Atom> atoms;
    if (p.sigma < 1.0) atoms.push_back({0.0, 1.0 - p.sigma});
    if (p.theta < 1.0) atoms.push_back({1.0, 1.0 - p.theta});
    const double n = p.sigma + p.theta;
    auto g = edge_density(sup.lo, sup.hi, n_nodes, [n](double x) { return n / (2.0 * kPi * x * (1.0 - x)); },
                          1.0 - atom_total(atoms));
    return SpectralMeasure(std::move(atoms), std::move(g), FamilyLabel{p});
}

Complex binomial_S(const FreeBinomialParams& p, Complex w)
{
    check_admissible(p);
    const Complex d = p.sigma + w;
    if (d == Complex(0.0)) throw EvaluationError("binomial_S: pole at w = -sigma");
    return 1.0 + p.theta / d;
}

bool has_closed_form_S(const SpectralMeasure& m)
{
    return m.family() && !std::holds_alternative<MeixnerParams>(*m.family());
}

Complex closed_form_S(const SpectralMeasure& m, Complex w)
{
    if (!m.family()) throw DomainError("closed_form_S: measure carries no family label");
    if (const auto* mp = std::get_if<MarchenkoPasturParams>(&*m.family())) return mp_S(*mp, w);
    if (const auto* bp = std::get_if<FreeBinomialParams>(&*m.family())) return binomial_S(*bp, w);
    throw DomainError("closed_form_S: no closed-form S for this family");
}

}  // namespace freeprob
