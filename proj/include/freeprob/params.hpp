#pragma once

#include <variant>

namespace freeprob {

/// Free Meixner law μ_{a,b}; requires b ≥ −1.
struct MeixnerParams {
    double a = 0.0;
    double b = 0.0;
};

/// Free Poisson law with rate lambda and jump size alpha.
struct MarchenkoPasturParams {
    double lambda = 1.0;
    double alpha = 1.0;
};

/// Free binomial law on [0,1].
struct FreeBinomialParams {
    double sigma = 1.0;
    double theta = 1.0;
};

using FamilyLabel = std::variant<MeixnerParams, MarchenkoPasturParams, FreeBinomialParams>;

void check_admissible(const MeixnerParams& p);
void check_admissible(const MarchenkoPasturParams& p);
void check_admissible(const FreeBinomialParams& p);

}  // namespace freeprob
