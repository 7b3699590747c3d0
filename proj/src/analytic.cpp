#include "freeprob/analytic.hpp"

#include <cmath>
#include <sstream>

#include "freeprob/errors.hpp"

namespace freeprob {

std::string to_string(DomainTag t)
{
    switch (t) {
    case DomainTag::UpperHalfPlane: return "upper-half-plane";
    case DomainTag::TruncatedCone: return "truncated-cone";
    case DomainTag::SlitPlane: return "slit-plane";
    case DomainTag::OmegaImage: return "omega-image";
    }
    return "unknown";
}

bool Domain::contains(Complex z) const
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    switch (tag) {
    case DomainTag::UpperHalfPlane: return z.imag() > 0.0;
    case DomainTag::TruncatedCone: return z.imag() > M && std::abs(z.real()) < eta * z.imag();
    case DomainTag::SlitPlane: return !(z.imag() == 0.0 && z.real() >= 0.0);
    case DomainTag::OmegaImage: return true;
    }
    return false;
}

AnalyticFunctionHandle::AnalyticFunctionHandle(Fn f, Domain domain, HandleKind kind, Fn df, double resolution)
    : f_(std::move(f)), df_(std::move(df)), domain_(domain), kind_(kind), resolution_(resolution)
{
}

Complex AnalyticFunctionHandle::operator()(Complex z) const
{
    if (!domain_.contains(z)) {
        std::ostringstream os;
        os.precision(17);
        os << "point " << z << " outside " << to_string(domain_.tag) << " domain";
        throw DomainError(os.str());
    }
    const Complex v = f_(z);
    if (kind_ == HandleKind::Cauchy && z.imag() > 0.0 && v.imag() > 1e-10 * std::abs(v) + 1e-300) {
        std::ostringstream os;
        os.precision(17);
        os << "branch rule violated: Im G(" << z << ") = " << v.imag() << " > 0";
        throw BranchError(os.str());
    }
    return v;
}

Complex AnalyticFunctionHandle::derivative(Complex z) const
{
    if (!domain_.contains(z)) throw DomainError("derivative requested outside the handle domain");
    if (df_) return df_(z);
    double h = 1e-6 * std::max(1.0, std::abs(z));
    if (domain_.tag == DomainTag::UpperHalfPlane || domain_.tag == DomainTag::TruncatedCone)
        h = std::min(h, 0.25 * (z.imag() - (domain_.tag == DomainTag::TruncatedCone ? domain_.M : 0.0)));
    const Complex dx(h, 0.0), dy(0.0, h);
    if (domain_.contains(z + dx) && domain_.contains(z - dx)) return (f_(z + dx) - f_(z - dx)) / (2.0 * h);
    return (f_(z + dy) - f_(z - dy)) / (2.0 * dy);
}

}  // namespace freeprob
