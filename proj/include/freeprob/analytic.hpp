#pragma once

#include <complex>
#include <functional>
#include <string>

namespace freeprob {

using Complex = std::complex<double>;

enum class DomainTag { UpperHalfPlane, TruncatedCone, SlitPlane, OmegaImage };

std::string to_string(DomainTag t);

/// Declared domain of an analytic handle. The cone is {z : Im z > M, |Re z| < η·Im z}.
struct Domain {
    DomainTag tag = DomainTag::UpperHalfPlane;
    double eta = 0.0;
    double M = 0.0;

    static Domain upper_half_plane() { return {}; }
    static Domain cone(double eta, double M) { return {DomainTag::TruncatedCone, eta, M}; }
    static Domain slit_plane() { return {DomainTag::SlitPlane, 0.0, 0.0}; }
    static Domain omega_image() { return {DomainTag::OmegaImage, 0.0, 0.0}; }

    bool contains(Complex z) const;
};

enum class HandleKind { Generic, Cauchy };

/// Analytic function on a declared domain. Cauchy-kind handles enforce Im z > 0 ⇒ Im f(z) ≤ 0.
class AnalyticFunctionHandle {
public:
    using Fn = std::function<Complex(Complex)>;

    AnalyticFunctionHandle(Fn f, Domain domain, HandleKind kind = HandleKind::Generic, Fn df = {},
                           double resolution = 0.0);

    Complex operator()(Complex z) const;
    /// Analytic derivative when supplied, otherwise a central difference inside the domain.
    Complex derivative(Complex z) const;

    const Domain& domain() const { return domain_; }
    HandleKind kind() const { return kind_; }
    bool has_derivative() const { return static_cast<bool>(df_); }
    /// Smallest imaginary part at which values are trusted for boundary-value recovery.
    double resolution() const { return resolution_; }

private:
    Fn f_;
    Fn df_;
    Domain domain_;
    HandleKind kind_;
    double resolution_;
};

}  // namespace freeprob
