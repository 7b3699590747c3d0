#include "freeprob/measure.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace freeprob {

namespace {

constexpr double kPi = std::numbers::pi;

std::string format_problems(const MeasureDiagnostics& d)
{
    std::ostringstream os;
    os << "invalid measure (total mass " << d.total_mass << ")";
    for (const auto& p : d.problems) os << "; " << p;
    return os.str();
}

bool is_chebyshev_grid(const DensityGrid& g)
{
    const std::size_t n = g.nodes.size();
    if (n < 2) return false;
    const auto ref = chebyshev_nodes(g.support_lo, g.support_hi, n);
    const double tol = 1e-12 * (g.support_hi - g.support_lo);
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(ref[i] - g.nodes[i]) > tol) return false;
    return true;
}

std::mutex& fftw_mutex()
{
    static std::mutex m;
    return m;
}

// Cosine coefficients c_k with g(θ_j) = Σ c_k cos(kθ_j), θ_j = (j+½)π/n.
std::vector<double> cosine_coefficients(const std::vector<double>& g)
{
    const int n = static_cast<int>(g.size());
    std::vector<double> in(g), out(g.size());
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT10, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    for (auto& v : out) v /= n;
    out[0] *= 0.5;
    double peak = 0.0;
    for (double v : out) peak = std::max(peak, std::abs(v));
    std::size_t keep = out.size();
    while (keep > 1 && std::abs(out[keep - 1]) <= 1e-15 * peak) --keep;
    out.resize(keep);
    return out;
}

}  // namespace

InvalidMeasure::InvalidMeasure(MeasureDiagnostics d) : Error(format_problems(d)), diag_(std::move(d)) {}

std::vector<double> chebyshev_nodes(double lo, double hi, std::size_t n)
{
    std::vector<double> x(n);
    const double mid = 0.5 * (lo + hi);
    const double hw = 0.5 * (hi - lo);
    for (std::size_t j = 0; j < n; ++j) {
        const double theta = (static_cast<double>(n - 1 - j) + 0.5) * kPi / static_cast<double>(n);
        x[j] = mid + hw * std::cos(theta);
    }
    return x;
}

ChebyshevCauchy::ChebyshevCauchy(double lo, double hi, std::vector<double> coefficients)
    : mid_(0.5 * (lo + hi)), hw_(0.5 * (hi - lo)), c_(std::move(coefficients)), tail_(c_.size() + 1, 0.0)
{
    for (std::size_t k = c_.size(); k-- > 0;) tail_[k] = std::max(tail_[k + 1], std::abs(c_[k]));
}

namespace {

constexpr double kSeriesCutoff = 1e-18;

}  // namespace

std::complex<double> ChebyshevCauchy::value(std::complex<double> z) const
{
    const std::complex<double> t = (z - mid_) / hw_;
    const std::complex<double> s = std::sqrt(t - 1.0) * std::sqrt(t + 1.0);
    const std::complex<double> r = 1.0 / (t + s);
    const double ar = std::abs(r);
    std::complex<double> p = 0.0, rk = 1.0;
    double ak = 1.0;
    for (std::size_t k = 0; k < c_.size(); ++k) {
        if (ak * tail_[k] * static_cast<double>(c_.size() - k) <= kSeriesCutoff * tail_[0]) break;
        p += c_[k] * rk;
        rk *= r;
        ak *= ar;
    }
    std::complex<double> g = kPi * p / s;
    // the truncated series can dip below zero next to a support edge
    if (z.imag() > 0.0 && g.imag() > 0.0) g.imag(0.0);
    if (z.imag() < 0.0 && g.imag() < 0.0) g.imag(0.0);
    return g;
}

std::complex<double> ChebyshevCauchy::derivative(std::complex<double> z) const
{
    const std::complex<double> t = (z - mid_) / hw_;
    const std::complex<double> s = std::sqrt(t - 1.0) * std::sqrt(t + 1.0);
    const std::complex<double> r = 1.0 / (t + s);
    const double ar = std::abs(r);
    std::complex<double> p = 0.0, dp = 0.0, rk = 1.0, rk1 = 0.0;
    double ak = 1.0;
    const double n = static_cast<double>(c_.size());
    for (std::size_t k = 0; k < c_.size(); ++k) {
        if (ak * tail_[k] * n * n <= kSeriesCutoff * tail_[0]) break;
        p += c_[k] * rk;
        dp += static_cast<double>(k) * c_[k] * rk1;
        rk1 = rk;
        rk *= r;
        ak *= ar;
    }
    const std::complex<double> d = -dp * r / (s * s) - p * t / (s * s * s);
    return kPi * d / hw_;
}

double ChebyshevCauchy::mass() const { return kPi * hw_ * c_[0]; }

std::vector<double> angle_midpoint_weights(const DensityGrid& g)
{
    const std::size_t n = g.nodes.size();
    std::vector<double> w(n, 0.0);
    if (n == 0) return w;
    const double mid = 0.5 * (g.support_lo + g.support_hi);
    const double hw = 0.5 * (g.support_hi - g.support_lo);
    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i)
        theta[i] = std::acos(std::clamp((g.nodes[i] - mid) / hw, -1.0, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double upper = i == 0 ? kPi : 0.5 * (theta[i - 1] + theta[i]);
        const double lower = i + 1 == n ? 0.0 : 0.5 * (theta[i] + theta[i + 1]);
        w[i] = (upper - lower) * hw * std::sin(theta[i]);
    }
    return w;
}

struct SpectralMeasure::Impl {
    std::vector<Atom> atoms;
    std::optional<DensityGrid> ac;
    std::optional<FamilyLabel> family;
    std::vector<double> weights;
    std::optional<ChebyshevCauchy> cheb;
    std::vector<double> cell_edges;  // x at angle-cell boundaries, increasing
    std::vector<double> cell_cumulative;
    double atom_mass = 0.0;
    double total_mass = 0.0;
    double hull_lo = 0.0;
    double hull_hi = 0.0;
};

SpectralMeasure::SpectralMeasure(std::vector<Atom> atoms, std::optional<DensityGrid> ac,
                                 std::optional<FamilyLabel> family)
{
    auto diag = validate(atoms, ac);
    if (!diag.pass) throw InvalidMeasure(std::move(diag));

    auto impl = std::make_shared<Impl>();
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
    impl->atoms = std::move(atoms);
    impl->family = std::move(family);
    for (const auto& a : impl->atoms) impl->atom_mass += a.mass;
    impl->hull_lo = std::numeric_limits<double>::infinity();
    impl->hull_hi = -std::numeric_limits<double>::infinity();
    for (const auto& a : impl->atoms) {
        impl->hull_lo = std::min(impl->hull_lo, a.location);
        impl->hull_hi = std::max(impl->hull_hi, a.location);
    }
    if (ac) {
        impl->weights = angle_midpoint_weights(*ac);
        const std::size_t n = ac->nodes.size();
        const double mid = 0.5 * (ac->support_lo + ac->support_hi);
        const double hw = 0.5 * (ac->support_hi - ac->support_lo);
        impl->cell_edges.resize(n + 1);
        impl->cell_cumulative.resize(n + 1);
        impl->cell_edges[0] = ac->support_lo;
        impl->cell_edges[n] = ac->support_hi;
        for (std::size_t i = 1; i < n; ++i) {
            const double t0 = std::acos(std::clamp((ac->nodes[i - 1] - mid) / hw, -1.0, 1.0));
            const double t1 = std::acos(std::clamp((ac->nodes[i] - mid) / hw, -1.0, 1.0));
            impl->cell_edges[i] = mid + hw * std::cos(0.5 * (t0 + t1));
        }
        impl->cell_cumulative[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            impl->cell_cumulative[i + 1] = impl->cell_cumulative[i] + impl->weights[i] * ac->values[i];
        if (is_chebyshev_grid(*ac)) {
            std::vector<double> g(n);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t i = n - 1 - j;
                const double theta = (static_cast<double>(j) + 0.5) * kPi / static_cast<double>(n);
                g[j] = ac->values[i] * std::sin(theta);
            }
            impl->cheb.emplace(ac->support_lo, ac->support_hi, cosine_coefficients(g));
        }
        impl->hull_lo = std::min(impl->hull_lo, ac->support_lo);
        impl->hull_hi = std::max(impl->hull_hi, ac->support_hi);
        impl->ac = std::move(ac);
    }
    impl->total_mass = impl->atom_mass + (impl->cell_cumulative.empty() ? 0.0 : impl->cell_cumulative.back());
    impl_ = std::move(impl);
}

SpectralMeasure SpectralMeasure::point_mass(double location) { return SpectralMeasure({Atom{location, 1.0}}); }

const std::vector<Atom>& SpectralMeasure::atoms() const { return impl_->atoms; }
const std::optional<DensityGrid>& SpectralMeasure::ac() const { return impl_->ac; }
const std::optional<FamilyLabel>& SpectralMeasure::family() const { return impl_->family; }
const std::vector<double>& SpectralMeasure::weights() const { return impl_->weights; }
const ChebyshevCauchy* SpectralMeasure::chebyshev() const { return impl_->cheb ? &*impl_->cheb : nullptr; }
double SpectralMeasure::total_mass() const { return impl_->total_mass; }
double SpectralMeasure::atom_mass() const { return impl_->atom_mass; }
double SpectralMeasure::hull_lo() const { return impl_->hull_lo; }
double SpectralMeasure::hull_hi() const { return impl_->hull_hi; }
const std::vector<double>& SpectralMeasure::cell_edges() const { return impl_->cell_edges; }
const std::vector<double>& SpectralMeasure::cell_cumulative() const { return impl_->cell_cumulative; }

std::optional<double> SpectralMeasure::mass_at(double location, double tol) const
{
    for (const auto& a : impl_->atoms)
        if (std::abs(a.location - location) <= tol) return a.mass;
    return std::nullopt;
}

MeasureDiagnostics validate(const std::vector<Atom>& atoms, const std::optional<DensityGrid>& ac)
{
    MeasureDiagnostics d;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto& a = atoms[i];
        if (!std::isfinite(a.location) || !std::isfinite(a.mass)) {
            d.problems.push_back("atom " + std::to_string(i) + " is not finite");
            continue;
        }
        if (a.mass <= 0.0) d.problems.push_back("atom " + std::to_string(i) + " has non-positive mass");
        if (a.mass > 1.0 + kNormTolerance) d.problems.push_back("atom " + std::to_string(i) + " has mass above 1");
        d.atom_mass += a.mass;
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            const double dist = std::abs(a.location - atoms[j].location);
            if (dist < kAtomCollisionTolerance) d.collisions.push_back({i, j, dist});
        }
    }
    if (!d.collisions.empty())
        d.problems.push_back(std::to_string(d.collisions.size()) + " atom location collision(s)");

    if (ac) {
        const auto& g = *ac;
        bool grid_ok = true;
        if (!std::isfinite(g.support_lo) || !std::isfinite(g.support_hi) || !(g.support_lo < g.support_hi)) {
            d.problems.push_back("density support is empty or not finite");
            grid_ok = false;
        }
        if (g.nodes.size() != g.values.size()) {
            d.problems.push_back("density nodes and values differ in length");
            grid_ok = false;
        }
        if (g.nodes.empty()) {
            d.problems.push_back("density grid has no nodes");
            grid_ok = false;
        }
        for (std::size_t i = 0; grid_ok && i < g.nodes.size(); ++i) {
            if (!std::isfinite(g.nodes[i]) || !std::isfinite(g.values[i])) {
                d.problems.push_back("density node " + std::to_string(i) + " is not finite");
                grid_ok = false;
                break;
            }
            if (i > 0 && !(g.nodes[i] > g.nodes[i - 1])) {
                d.problems.push_back("density nodes not strictly increasing at " + std::to_string(i));
                grid_ok = false;
            }
            if (g.nodes[i] < g.support_lo || g.nodes[i] > g.support_hi) {
                d.problems.push_back("density node " + std::to_string(i) + " outside support");
                grid_ok = false;
            }
            if (g.values[i] < 0.0) {
                ++d.negative_values;
                d.most_negative_value = std::min(d.most_negative_value, g.values[i]);
            }
        }
        if (d.negative_values > 0)
            d.problems.push_back(std::to_string(d.negative_values) + " negative density value(s)");
        if (grid_ok) {
            const auto w = angle_midpoint_weights(g);
            for (std::size_t i = 0; i < w.size(); ++i) d.ac_mass += w[i] * g.values[i];
        }
    }
    d.total_mass = d.atom_mass + d.ac_mass;
    if (std::abs(d.total_mass - 1.0) > kNormTolerance) {
        std::ostringstream os;
        os.precision(12);
        os << "total mass " << d.total_mass << " outside 1 +/- " << kNormTolerance;
        d.problems.push_back(os.str());
    }
    d.pass = d.problems.empty();
    return d;
}

MeasureDiagnostics validate(const SpectralMeasure& m) { return validate(m.atoms(), m.ac()); }

std::complex<double> integrate(const SpectralMeasure& m, const std::function<std::complex<double>(double)>& f)
{
    std::complex<double> sum = 0.0;
    for (const auto& a : m.atoms()) {
        const auto v = f(a.location);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            std::ostringstream os;
            os.precision(17);
            os << "integrand not finite at atom x=" << a.location;
            throw EvaluationError(os.str());
        }
        sum += a.mass * v;
    }
    if (const auto& ac = m.ac()) {
        const auto& w = m.weights();
        for (std::size_t i = 0; i < ac->nodes.size(); ++i) {
            const double wi = w[i] * ac->values[i];
            if (wi == 0.0) continue;
            const auto v = f(ac->nodes[i]);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                std::ostringstream os;
                os.precision(17);
                os << "integrand not finite at density node " << i << " x=" << ac->nodes[i];
                throw EvaluationError(os.str());
            }
            sum += wi * v;
        }
    }
    return sum;
}

double moment(const SpectralMeasure& m, int k)
{
    if (k < 0) throw DomainError("moment order must be non-negative");
    if (k == 0) return m.total_mass();
    return integrate(m, [k](double x) {
               double p = 1.0;
               for (int i = 0; i < k; ++i) p *= x;
               return std::complex<double>(p, 0.0);
           })
        .real();
}

double mean(const SpectralMeasure& m) { return moment(m, 1); }

double variance(const SpectralMeasure& m)
{
    const double mu = moment(m, 1);
    return moment(m, 2) - mu * mu;
}

namespace {

double ac_cdf(const SpectralMeasure& m, double x)
{
    const auto& edges = m.cell_edges();
    const auto& cum = m.cell_cumulative();
    if (edges.empty() || x <= edges.front()) return 0.0;
    if (x >= edges.back()) return cum.back();
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()) - 1;
    const double a = edges[k], b = edges[k + 1];
    const double frac = b > a ? std::clamp((x - a) / (b - a), 0.0, 1.0) : 1.0;
    return cum[k] + frac * (cum[k + 1] - cum[k]);
}

}  // namespace

double cdf(const SpectralMeasure& m, double x)
{
    double s = 0.0;
    for (const auto& a : m.atoms())
        if (a.location <= x) s += a.mass;
    return s + ac_cdf(m, x);
}

namespace {

std::vector<double> breakpoints(const SpectralMeasure& m)
{
    std::vector<double> p(m.cell_edges());
    for (const auto& a : m.atoms()) p.push_back(a.location);
    return p;
}

// Running CDF evaluator over sorted query points; linear in the number of breakpoints.
class CdfSweep {
public:
    explicit CdfSweep(const SpectralMeasure& m) : m_(m), edges_(m.cell_edges()), cum_(m.cell_cumulative()) {}

    // Returns (F(x−), F(x)); queries must be non-decreasing.
    std::pair<double, double> at(double x)
    {
        const auto& atoms = m_.atoms();
        while (atom_ < atoms.size() && atoms[atom_].location < x) below_ += atoms[atom_++].mass;
        double at_x = 0.0;
        for (std::size_t k = atom_; k < atoms.size() && atoms[k].location == x; ++k) at_x += atoms[k].mass;
        double ac = 0.0;
        if (!edges_.empty() && x > edges_.front()) {
            if (x >= edges_.back()) {
                ac = cum_.back();
            } else {
                while (cell_ + 1 < edges_.size() - 1 && edges_[cell_ + 1] <= x) ++cell_;
                const double a = edges_[cell_], b = edges_[cell_ + 1];
                const double frac = b > a ? std::clamp((x - a) / (b - a), 0.0, 1.0) : 1.0;
                ac = cum_[cell_] + frac * (cum_[cell_ + 1] - cum_[cell_]);
            }
        }
        return {below_ + ac, below_ + at_x + ac};
    }

private:
    const SpectralMeasure& m_;
    const std::vector<double>& edges_;
    const std::vector<double>& cum_;
    std::size_t atom_ = 0;
    std::size_t cell_ = 0;
    double below_ = 0.0;
};

}  // namespace

double ks_distance(const SpectralMeasure& a, const SpectralMeasure& b)
{
    auto pts = breakpoints(a);
    auto pb = breakpoints(b);
    pts.insert(pts.end(), pb.begin(), pb.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    // Breakpoints closer than the atom collision tolerance count as one point.
    CdfSweep sa(a), sb(b);
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        while (j + 1 < pts.size() && pts[j + 1] - pts[i] <= kAtomCollisionTolerance * (1.0 + std::abs(pts[i]))) ++j;
        const double left = std::abs(sa.at(pts[i]).first - sb.at(pts[i]).first);
        const double right = std::abs(sa.at(pts[j]).second - sb.at(pts[j]).second);
        d = std::max({d, left, right});
        i = j + 1;
    }
    return d;
}

double ks_distance_to_sample(const SpectralMeasure& m, std::vector<double> sample)
{
    if (sample.empty()) throw DomainError("empty sample");
    // eigenvalues of an exact multiple of I scatter by rounding around the atom
    for (double& x : sample)
        for (const auto& a : m.atoms())
            if (std::abs(x - a.location) <= 1e-9 * (1.0 + std::abs(a.location))) x = a.location;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    auto pts = breakpoints(m);
    pts.insert(pts.end(), sample.begin(), sample.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    CdfSweep sweep(m);
    std::size_t below = 0, upto = 0;
    double d = 0.0;
    for (double x : pts) {
        while (below < sample.size() && sample[below] < x) ++below;
        upto = std::max(upto, below);
        while (upto < sample.size() && sample[upto] <= x) ++upto;
        const auto f = sweep.at(x);
        d = std::max({d, std::abs(f.first - static_cast<double>(below) / n), std::abs(f.second - static_cast<double>(upto) / n)});
    }
    return d;
}

double quantile(const SpectralMeasure& m, double p)
{
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
    double lo = m.hull_lo(), hi = m.hull_hi();
    if (cdf(m, lo) >= p) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
        const double c = 0.5 * (lo + hi);
        if (cdf(m, c) >= p) hi = c; else lo = c;
    }
    return hi;
}

SpectralMeasure dilate(const SpectralMeasure& m, double c)
{
    if (c == 0.0 || !std::isfinite(c)) throw DomainError("dilation factor must be finite and non-zero");
    std::vector<Atom> atoms;
    for (const auto& a : m.atoms()) atoms.push_back({c * a.location, a.mass});
    std::optional<DensityGrid> ac;
    if (m.ac()) {
        const auto& g = *m.ac();
        DensityGrid d;
        const double s = std::abs(c);
        d.support_lo = c > 0 ? c * g.support_lo : c * g.support_hi;
        d.support_hi = c > 0 ? c * g.support_hi : c * g.support_lo;
        d.nodes.resize(g.nodes.size());
        d.values.resize(g.values.size());
        const std::size_t n = g.nodes.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = c > 0 ? i : n - 1 - i;
            d.nodes[j] = c * g.nodes[i];
            d.values[j] = g.values[i] / s;
        }
        d.nodes.front() = std::max(d.nodes.front(), d.support_lo);
        d.nodes.back() = std::min(d.nodes.back(), d.support_hi);
        ac = std::move(d);
    }
    return SpectralMeasure(std::move(atoms), std::move(ac));
}

SpectralMeasure shift(const SpectralMeasure& m, double c)
{
    std::vector<Atom> atoms;
    for (const auto& a : m.atoms()) atoms.push_back({a.location + c, a.mass});
    std::optional<DensityGrid> ac;
    if (m.ac()) {
        DensityGrid d = *m.ac();
        d.support_lo += c;
        d.support_hi += c;
        for (auto& x : d.nodes) x += c;
        d.nodes.front() = std::max(d.nodes.front(), d.support_lo);
        d.nodes.back() = std::min(d.nodes.back(), d.support_hi);
        ac = std::move(d);
    }
    return SpectralMeasure(std::move(atoms), std::move(ac));
}

}  // namespace freeprob
