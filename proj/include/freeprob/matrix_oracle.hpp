#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "freeprob/characterizations.hpp"
#include "freeprob/measure.hpp"

namespace freeprob {

struct MatrixEnsembleConfig {
    int N = 1000;
    int trials = 25;
    std::uint64_t seed = 7;
    int projection_degree = 6;
    /// Eigenvalues drawn i.i.d. from the law instead of taken on the quantile grid.
    bool iid = false;
};

void check_config(const MatrixEnsembleConfig& cfg);

struct TrialDetail {
    int trial = 0;
    double ks_distance = 0.0;
    double regression_residual = 0.0;
    double control_residual = 0.0;
    double conditional_variance_residual = 0.0;
    double mean_error = 0.0;
};

struct OracleReport {
    std::string check;
    MatrixEnsembleConfig config;
    /// Averages over trials.
    double ks_distance = 0.0;
    double regression_residual = 0.0;
    double conditional_variance_residual = 0.0;
    /// Regression residual of the same matrices against a wrong α.
    double control_residual = 0.0;
    double control_alpha = 0.0;
    double mean_error = 0.0;
    /// Coefficients of the degree-2 projection of X² in (1, S, S²), averaged, and the predicted ones.
    std::vector<double> variance_coefficients;
    std::vector<double> predicted_variance_coefficients;
    int degree_used = 0;
    std::vector<std::string> warnings;
    std::vector<TrialDetail> trials;
};

/// Seeded per-trial stream.
std::mt19937_64 trial_rng(std::uint64_t seed, int trial);

/// Haar unitary: QR of a complex Ginibre matrix with the phases of diag(R) divided out.
Eigen::MatrixXcd haar_unitary(int N, std::mt19937_64& rng);
/// N eigenvalues of m: the quantile grid (k + ½)/N, or an i.i.d. sample.
std::vector<double> sample_spectrum(const SpectralMeasure& m, int N, std::mt19937_64& rng, bool iid = false);
/// U·diag(spectrum)·U* with U Haar.
Eigen::MatrixXcd sample_matrix(const SpectralMeasure& m, int N, std::mt19937_64& rng, bool iid = false);
/// U·diag(spectrum)·U* for U Haar without forming U: the Householder reflections of Gaussian vectors are applied
/// to both sides of the diagonal. Same law as sample_matrix; the trials of the oracle checks use this form.
Eigen::MatrixXcd haar_conjugate(const std::vector<double>& spectrum, std::mt19937_64& rng);

OracleReport empirical_free_add(const SpectralMeasure& mu, const SpectralMeasure& nu,
                                const MatrixEnsembleConfig& cfg = {});
/// X, Y drawn from the laws of the free regression pair; X is projected onto polynomials in S = X + Y.
OracleReport conditional_regression_check(const RegressionSpec& spec, const MatrixEnsembleConfig& cfg = {});
OracleReport empirical_free_mult(const SpectralMeasure& mu_pos, const SpectralMeasure& nu_pos,
                                 const MatrixEnsembleConfig& cfg = {});

}  // namespace freeprob
