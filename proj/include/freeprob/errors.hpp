#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace freeprob {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite integrand, pole hit, or similar evaluation failure.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Argument outside the declared domain of a transform or handle.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A G-type handle returned Im G > 0 on the upper half-plane, or a recovered density went negative.
class BranchError : public Error {
public:
    using Error::Error;
};

/// Parameters outside a family's admissible set.
class InadmissibleError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failure; carries the iterate history.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<std::complex<double>> trace)
        : Error(what), trace_(std::move(trace)) {}
    const std::vector<std::complex<double>>& trace() const { return trace_; }

private:
    std::vector<std::complex<double>> trace_;
};

}  // namespace freeprob
