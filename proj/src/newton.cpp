#include "freeprob/newton.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "freeprob/errors.hpp"

namespace freeprob {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

Complex damped_newton(const NewtonProblem& p, Complex z0, double tol, int max_iter, const std::string& what)
{
    std::vector<Complex> trace{z0};
    auto ok = [&](Complex z) { return finite(z) && (!p.admissible || p.admissible(z)); };
    if (!ok(z0)) throw ConvergenceError(what + ": starting point not admissible", trace);

    const double target = tol * (1.0 + p.scale);
    Complex z = z0;
    Complex fz = p.f(z);
    Complex z_prev = std::numeric_limits<double>::quiet_NaN();
    Complex f_prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        if (!finite(fz)) throw ConvergenceError(what + ": residual not finite", trace);
        if (std::abs(fz) <= target) return z;

        Complex d = p.df ? p.df(z) : Complex(std::numeric_limits<double>::quiet_NaN());
        if (!finite(d) || std::abs(d) < 1e-300) {
            if (finite(z_prev) && z != z_prev) d = (fz - f_prev) / (z - z_prev);
            else d = 1.0;
        }
        const Complex step = fz / d;

        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, lambda *= 0.5) {
            const Complex trial = z - lambda * step;
            if (!ok(trial)) continue;
            const Complex ft = p.f(trial);
            if (!finite(ft)) continue;
            if (std::abs(ft) < std::abs(fz) || std::abs(ft) <= target) {
                z_prev = z;
                f_prev = fz;
                z = trial;
                fz = ft;
                accepted = true;
                break;
            }
        }
        trace.push_back(z);
        if (!accepted) {
            if (std::abs(fz) <= 1e3 * target) return z;
            throw ConvergenceError(what + ": no descent step found", trace);
        }
    }
    if (std::abs(fz) <= target) return z;
    throw ConvergenceError(what + ": no convergence within max_iter", trace);
}

}  // namespace freeprob
