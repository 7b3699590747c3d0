#pragma once

#include <functional>
#include <string>

#include "freeprob/analytic.hpp"

namespace freeprob {

struct NewtonProblem {
    std::function<Complex(Complex)> f;
    std::function<Complex(Complex)> df;
    /// Iterates failing this test are pulled back by step halving.
    std::function<bool(Complex)> admissible;
    /// Converged when |f| ≤ tol·(1 + scale).
    double scale = 0.0;
};

/// Damped Newton with secant fallback on derivative blow-up; throws ConvergenceError with the iterate trace.
Complex damped_newton(const NewtonProblem& p, Complex z0, double tol, int max_iter, const std::string& what);

}  // namespace freeprob
