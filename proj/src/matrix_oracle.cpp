#include "freeprob/matrix_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

#include "freeprob/convolution.hpp"
#include "freeprob/errors.hpp"
#include "freeprob/parallel.hpp"

namespace freeprob {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// B = W·W*, both triangles filled.
void hermitian_square(const MatrixXcd& W, MatrixXcd& B)
{
    B.setZero(W.rows(), W.rows());
    B.selfadjointView<Eigen::Lower>().rankUpdate(W);
    B.triangularView<Eigen::StrictlyUpper>() = B.adjoint();
}

// U·diag(d)·U* = W·W* + m·I with W = U·diag(√(d − m)), m = min d.
MatrixXcd rotate(const MatrixXcd& U, const std::vector<double>& spectrum)
{
    const VectorXd d = Eigen::Map<const VectorXd>(spectrum.data(), static_cast<Eigen::Index>(spectrum.size()));
    const double m = d.minCoeff();
    const MatrixXcd W = U * (d.array() - m).sqrt().matrix().asDiagonal();
    MatrixXcd B;
    hermitian_square(W, B);
    B.diagonal().array() += m;
    return B;
}

void ginibre(MatrixXcd& Z, int N, std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    Z.resize(N, N);
    for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = {g(rng), g(rng)};
}

// Per-thread buffers, so that repeated trials of one size do not reallocate.
struct Workspace {
    MatrixXcd S, E;
    std::map<int, MatrixXcd> T;
};

Workspace& workspace()
{
    thread_local Workspace ws;
    return ws;
}

// H = I − τvv* with v₀ = 1 and H*·(α, x) = (β, 0), β real.
void make_reflector(Complex& alpha, Eigen::Ref<Eigen::VectorXcd> x, Complex& tau)
{
    const double xn = x.norm();
    if (xn == 0.0 && alpha.imag() == 0.0) {
        tau = 0.0;
        return;
    }
    const double beta = -std::copysign(std::sqrt(std::norm(alpha) + xn * xn), alpha.real());
    tau = Complex((beta - alpha.real()) / beta, -alpha.imag() / beta);
    x *= 1.0 / (alpha - beta);
    alpha = beta;
}

// Lower triangle of U·diag(d)·U* with U = H₁⋯H_{N−1}, H_k the Householder reflection of a Gaussian vector on
// coordinates k..N. This is the unitary factor of a Gaussian matrix's QR decomposition; the phases cancel.
// Reflections are applied two-sided in panels of nb, the trailing matrix updated once per panel.
void haar_conjugate_lower(MatrixXcd& B, const std::vector<double>& d, std::mt19937_64& rng)
{
    constexpr Eigen::Index nb = 32;
    const Eigen::Index N = static_cast<Eigen::Index>(d.size());
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    B.setZero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) B(i, i) = d[i];
    MatrixXcd V(N, nb), W(N, nb);
    for (Eigen::Index k_hi = N - 2; k_hi >= 0; k_hi -= nb) {
        const Eigen::Index k_lo = std::max<Eigen::Index>(0, k_hi - nb + 1), M = N - k_lo, cols = k_hi - k_lo + 1;
        auto P = B.bottomRightCorner(M, M);
        auto Vp = V.topLeftCorner(M, cols);
        auto Wp = W.topLeftCorner(M, cols);
        Vp.setZero();
        Wp.setZero();
        for (Eigen::Index k = k_hi; k >= k_lo; --k) {
            const Eigen::Index c = k_hi - k, off = k - k_lo, m = N - k;
            auto v = Vp.col(c).segment(off, m);
            for (Eigen::Index i = 0; i < m; ++i) v[i] = Complex(g(rng), g(rng));
            Complex alpha = v[0], tau;
            make_reflector(alpha, v.tail(m - 1), tau);
            v[0] = 1.0;
            // y = B·v with the panel's pending updates, then H·B·H* = B − v·w* − w·v*.
            auto w = Wp.col(c).segment(off, m);
            w.noalias() = P.block(off, off, m, m).template selfadjointView<Eigen::Lower>() * v;
            if (c > 0) {
                auto Vo = Vp.block(off, 0, m, c);
                auto Wo = Wp.block(off, 0, m, c);
                Eigen::VectorXcd t = Wo.adjoint() * v;
                w.noalias() -= Vo * t;
                t.noalias() = Vo.adjoint() * v;
                w.noalias() -= Wo * t;
            }
            const double mu = v.dot(w).real();
            w = std::conj(tau) * w - 0.5 * std::norm(tau) * mu * v;
        }
        P.template triangularView<Eigen::Lower>() -= Vp * Wp.adjoint();
        P.template triangularView<Eigen::Lower>() -= Wp * Vp.adjoint();
    }
}

// Eigenvalues of a Hermitian matrix (lower triangle read, A overwritten). Panels of nb columns are reduced to tridiagonal
// form with the trailing matrix updated once per panel by a rank-2nb product; the tail goes to Eigen.
std::vector<double> eigenvalues(MatrixXcd& A)
{
    constexpr Eigen::Index nb = 32;
    const Eigen::Index n = A.rows();
    VectorXd d(n), e(std::max<Eigen::Index>(n - 1, 0));
    MatrixXcd W(n, nb);
    Eigen::Index i = 0;
    for (; n - i > 2 * nb; i += nb) {
        const Eigen::Index m = n - i;
        auto P = A.bottomRightCorner(m, m);
        auto Wm = W.topRows(m);
        Wm.setZero();
        for (Eigen::Index j = 0; j < nb; ++j) {
            const Eigen::Index r = m - j;
            if (j > 0) {
                P.col(j).tail(r).noalias() -= P.block(j, 0, r, j) * Wm.row(j).head(j).adjoint();
                P.col(j).tail(r).noalias() -= Wm.block(j, 0, r, j) * P.row(j).head(j).adjoint();
            }
            P(j, j) = P(j, j).real();
            Complex alpha = P(j + 1, j), tau;
            make_reflector(alpha, P.col(j).tail(r - 2), tau);
            e[i + j] = alpha.real();
            P(j + 1, j) = 1.0;
            auto v = P.col(j).tail(r - 1);
            auto w = Wm.col(j).tail(r - 1);
            w.noalias() = P.bottomRightCorner(r - 1, r - 1).template selfadjointView<Eigen::Lower>() * v;
            if (j > 0) {
                Eigen::VectorXcd t = Wm.block(j + 1, 0, r - 1, j).adjoint() * v;
                w.noalias() -= P.block(j + 1, 0, r - 1, j) * t;
                t.noalias() = P.block(j + 1, 0, r - 1, j).adjoint() * v;
                w.noalias() -= Wm.block(j + 1, 0, r - 1, j) * t;
            }
            w *= tau;
            const Complex a = -0.5 * tau * w.dot(v);
            w += a * v;
        }
        const Eigen::Index r = m - nb;
        auto V = P.block(nb, 0, r, nb);
        auto Wb = Wm.block(nb, 0, r, nb);
        auto A22 = P.bottomRightCorner(r, r);
        A22.template triangularView<Eigen::Lower>() -= V * Wb.adjoint();
        A22.template triangularView<Eigen::Lower>() -= Wb * V.adjoint();
        for (Eigen::Index j = 0; j < nb; ++j) {
            P(j + 1, j) = e[i + j];
            d[i + j] = P(j, j).real();
        }
    }
    const Eigen::Index m = n - i;
    MatrixXcd rest = A.bottomRightCorner(m, m);
    rest.triangularView<Eigen::StrictlyUpper>() = rest.adjoint();
    Eigen::Tridiagonalization<MatrixXcd> tri(rest);
    d.tail(m) = tri.diagonal();
    if (m > 1) e.tail(m - 1) = tri.subDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EvaluationError("matrix oracle: eigenvalue solver failed");
    const VectorXd& v = es.eigenvalues();
    return {v.data(), v.data() + v.size()};
}

// diag(A·B) for Hermitian B.
VectorXd diag_product(const MatrixXcd& A, const MatrixXcd& B)
{
    return A.cwiseProduct(B.conjugate()).rowwise().sum().real();
}

// Quantile grids are shared by all trials; i.i.d. spectra are drawn per trial.
class SpectrumSource {
public:
    SpectrumSource(const SpectralMeasure& m, const MatrixEnsembleConfig& cfg) : m_(m), cfg_(cfg)
    {
        std::mt19937_64 unused;
        if (!cfg.iid) grid_ = sample_spectrum(m, cfg.N, unused, false);
    }
    std::vector<double> draw(std::mt19937_64& rng) const
    {
        return cfg_.iid ? sample_spectrum(m_, cfg_.N, rng, true) : grid_;
    }

private:
    const SpectralMeasure& m_;
    const MatrixEnsembleConfig& cfg_;
    std::vector<double> grid_;
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

struct Projection {
    double residual = 0.0;
    double control = 0.0;
    std::vector<double> var_coefficients;
    int degree = 0;
    bool reduced = false;
};

// Least-squares projection of X (diagonal) onto Chebyshev polynomials of the scaled S, in τ = tr/N.
Projection project(const std::vector<double>& x, Workspace& ws, int degree, double alpha, double control_alpha)
{
    const int N = static_cast<int>(x.size());
    const MatrixXcd& S = ws.S;
    ws.E = S;
    const std::vector<double> lam = eigenvalues(ws.E);
    const double lo = lam.front(), hi = lam.back();
    const double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
    Projection out;
    const VectorXd xv = Eigen::Map<const VectorXd>(x.data(), N);

    int D = hw > 1e-12 * (1.0 + std::abs(mid)) ? degree : 0;
    // T_m(S) as matrices, even orders by squaring: T_2m = 2T_m² − 1, T_2m+1 = 2T_m+1·T_m − T_1.
    std::map<int, MatrixXcd>& T = ws.T;
    std::set<int> ready;
    if (D >= 1) {
        MatrixXcd& t1 = T[1];
        t1 = S;
        t1.diagonal().array() -= mid;
        t1 /= hw;
        ready.insert(1);
    }
    std::function<const MatrixXcd&(int)> mat = [&](int m) -> const MatrixXcd& {
        if (ready.count(m)) return T.at(m);
        if (m % 2 == 0) {
            const MatrixXcd& half = mat(m / 2);
            MatrixXcd& t = T[m];
            hermitian_square(half, t);
            t *= 2.0;
            t.diagonal().array() -= 1.0;
        } else {
            const MatrixXcd& hi = mat(m / 2 + 1);
            const MatrixXcd& lo = mat(m / 2);
            MatrixXcd& t = T[m];
            t.noalias() = 2.0 * hi * lo;
            t -= T.at(1);
        }
        ready.insert(m);
        return T.at(m);
    };
    for (int p = 2; p < D; p *= 2) mat(p);

    // diag T_{a+b} = 2·diag(T_a·T_b) − diag T_{a−b}.
    std::vector<VectorXd> dT(std::max(D, 1) + 1);
    dT[0] = VectorXd::Ones(N);
    if (D >= 1) dT[1] = T.at(1).diagonal().real();
    for (int k = 2; k <= D; ++k) {
        int a = (k + 1) / 2, b = k / 2;
        for (int c = k - 1; c >= (k + 1) / 2; --c)
            if (ready.count(c) && ready.count(k - c)) {
                a = c;
                b = k - c;
                break;
            }
        const MatrixXcd& ta = mat(a);
        dT[k] = 2.0 * diag_product(ta, mat(b)) - dT[a - b];
    }

    // τ(T_m) from the spectrum.
    std::vector<double> tr(2 * D + 1, 0.0);
    for (double l : lam) {
        const double t = D > 0 ? std::acos(std::clamp((l - mid) / hw, -1.0, 1.0)) : 0.0;
        for (int m = 0; m <= 2 * D; ++m) tr[m] += std::cos(m * t);
    }
    for (double& v : tr) v /= N;

    MatrixXd G;
    VectorXd b, c;
    for (;; --D) {
        G.resize(D + 1, D + 1);
        b.resize(D + 1);
        for (int j = 0; j <= D; ++j) {
            b[j] = xv.dot(dT[j]) / N;
            for (int k = 0; k <= D; ++k) G(j, k) = 0.5 * (tr[j + k] + tr[std::abs(j - k)]);
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> ge(G, Eigen::EigenvaluesOnly);
        if (D == 0 || ge.eigenvalues().minCoeff() > 1e-13 * ge.eigenvalues().maxCoeff()) break;
        out.reduced = true;
    }
    c = G.ldlt().solve(b);
    out.degree = D;
    auto residual_against = [&](double a) {
        VectorXd e = c;
        e[0] -= a * mid;
        if (D >= 1) e[1] -= a * hw;
        return std::sqrt(std::max(0.0, e.dot(G * e)));
    };
    out.residual = residual_against(alpha);
    out.control = residual_against(control_alpha);

    // Degree-2 projection of X² in the monomial basis (1, S, S²).
    VectorXd dS = S.diagonal().real();
    VectorXd dS2 = ready.count(1) ? VectorXd(hw * hw * diag_product(T.at(1), T.at(1)) + 2.0 * mid * (dS.array() - mid).matrix() +
                                     mid * mid * VectorXd::Ones(N))
                          : VectorXd(dS.array().square().matrix());
    double mom[5] = {0, 0, 0, 0, 0};
    for (double l : lam)
        for (int m = 0; m <= 4; ++m) mom[m] += std::pow(l, m);
    Eigen::Matrix3d M;
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) M(j, k) = mom[j + k] / N;
    const VectorXd x2 = xv.array().square().matrix();
    Eigen::Vector3d r(x2.sum() / N, x2.dot(dS) / N, x2.dot(dS2) / N);
    const Eigen::Vector3d q = M.completeOrthogonalDecomposition().solve(r);
    out.var_coefficients = {q[0], q[1], q[2]};
    return out;
}

}  // namespace

void check_config(const MatrixEnsembleConfig& cfg)
{
    if (cfg.N < 16) throw DomainError("MatrixEnsembleConfig: N must be >= 16");
    if (cfg.trials < 1) throw DomainError("MatrixEnsembleConfig: trials must be >= 1");
    if (cfg.projection_degree < 2) throw DomainError("MatrixEnsembleConfig: projection_degree must be >= 2");
}

std::mt19937_64 trial_rng(std::uint64_t seed, int trial)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), 0x5eedu};
    return std::mt19937_64(seq);
}

Eigen::MatrixXcd haar_unitary(int N, std::mt19937_64& rng)
{
    MatrixXcd Z;
    ginibre(Z, N, rng);
    Eigen::HouseholderQR<MatrixXcd> qr(Z);
    MatrixXcd Q = qr.householderQ();
    const auto& R = qr.matrixQR();
    for (int j = 0; j < N; ++j) {
        const Complex r = R(j, j);
        const double a = std::abs(r);
        if (a > 0.0) Q.col(j) *= r / a;
    }
    return Q;
}

std::vector<double> sample_spectrum(const SpectralMeasure& m, int N, std::mt19937_64& rng, bool iid)
{
    std::vector<double> s(N);
    if (iid) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : s) v = quantile(m, std::max(1e-300, u(rng)));
        std::sort(s.begin(), s.end());
    } else {
        for (int k = 0; k < N; ++k) s[k] = quantile(m, (k + 0.5) / N);
    }
    return s;
}

Eigen::MatrixXcd haar_conjugate(const std::vector<double>& spectrum, std::mt19937_64& rng)
{
    MatrixXcd B;
    haar_conjugate_lower(B, spectrum, rng);
    B.triangularView<Eigen::StrictlyUpper>() = B.adjoint();
    return B;
}

Eigen::MatrixXcd sample_matrix(const SpectralMeasure& m, int N, std::mt19937_64& rng, bool iid)
{
    const auto spec = sample_spectrum(m, N, rng, iid);
    return rotate(haar_unitary(N, rng), spec);
}

OracleReport empirical_free_add(const SpectralMeasure& mu, const SpectralMeasure& nu, const MatrixEnsembleConfig& cfg)
{
    check_config(cfg);
    const FreeAddition pred = free_add(mu, nu);
    const double pred_mean = mean(mu) + mean(nu);
    OracleReport rep;
    rep.check = "add";
    const SpectrumSource A(mu, cfg), B(nu, cfg);
    rep.config = cfg;
    rep.trials.resize(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t t) {
        auto rng = trial_rng(cfg.seed, static_cast<int>(t));
        const auto a = A.draw(rng);
        Workspace& ws = workspace();
        haar_conjugate_lower(ws.S, B.draw(rng), rng);
        for (int i = 0; i < cfg.N; ++i) ws.S(i, i) += a[i];
        const auto ev = eigenvalues(ws.S);
        TrialDetail& d = rep.trials[t];
        d.trial = static_cast<int>(t);
        d.ks_distance = ks_distance_to_sample(pred.law, ev);
        d.mean_error = std::abs(mean_of(ev) - pred_mean);
    });
    for (const auto& d : rep.trials) {
        rep.ks_distance += d.ks_distance / cfg.trials;
        rep.mean_error += d.mean_error / cfg.trials;
    }
    return rep;
}

OracleReport conditional_regression_check(const RegressionSpec& spec, const MatrixEnsembleConfig& cfg)
{
    check_config(cfg);
    check_admissible(spec);
    const SpectralMeasure X = scaled_meixner_measure(spec.alpha, spec.a, spec.b);
    const SpectralMeasure Y = scaled_meixner_measure(spec.beta, spec.a, spec.b);
    OracleReport rep;
    rep.check = "regression";
    const SpectrumSource XS(X, cfg), YS(Y, cfg);
    rep.config = cfg;
    rep.control_alpha = spec.alpha <= 0.5 ? spec.alpha + 0.25 : spec.alpha - 0.25;
    const double k = spec.alpha * spec.beta / (spec.b + 1.0);
    rep.predicted_variance_coefficients = {k, k * spec.a, k * spec.b + spec.alpha * spec.alpha};
    rep.variance_coefficients.assign(3, 0.0);
    rep.trials.resize(cfg.trials);
    std::vector<Projection> proj(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t t) {
        auto rng = trial_rng(cfg.seed, static_cast<int>(t));
        const auto x = XS.draw(rng);
        Workspace& ws = workspace();
        haar_conjugate_lower(ws.S, YS.draw(rng), rng);
        ws.S.triangularView<Eigen::StrictlyUpper>() = ws.S.adjoint();
        for (int i = 0; i < cfg.N; ++i) ws.S(i, i) += x[i];
        proj[t] = project(x, ws, cfg.projection_degree, spec.alpha, rep.control_alpha);
    });
    const auto& pc = rep.predicted_variance_coefficients;
    const double scale = std::max({std::abs(pc[0]), std::abs(pc[1]), std::abs(pc[2])});
    rep.degree_used = cfg.projection_degree;
    for (int t = 0; t < cfg.trials; ++t) {
        const Projection& p = proj[t];
        TrialDetail& d = rep.trials[t];
        d.trial = t;
        d.regression_residual = p.residual;
        d.control_residual = p.control;
        for (int j = 0; j < 3; ++j) {
            d.conditional_variance_residual =
                std::max(d.conditional_variance_residual, std::abs(p.var_coefficients[j] - pc[j]) / scale);
            rep.variance_coefficients[j] += p.var_coefficients[j] / cfg.trials;
        }
        rep.degree_used = std::min(rep.degree_used, p.degree);
        rep.regression_residual += p.residual / cfg.trials;
        rep.control_residual += p.control / cfg.trials;
        rep.conditional_variance_residual += d.conditional_variance_residual / cfg.trials;
    }
    if (rep.degree_used < cfg.projection_degree)
        rep.warnings.push_back("ill-conditioned Gram matrix: projection degree reduced to " +
                               std::to_string(rep.degree_used));
    return rep;
}

OracleReport empirical_free_mult(const SpectralMeasure& mu_pos, const SpectralMeasure& nu_pos,
                                 const MatrixEnsembleConfig& cfg)
{
    check_config(cfg);
    const FreeProduct pred = free_mult(mu_pos, nu_pos);
    OracleReport rep;
    rep.check = "mult";
    const SpectrumSource A(mu_pos, cfg), B(nu_pos, cfg);
    rep.config = cfg;
    rep.trials.resize(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t t) {
        auto rng = trial_rng(cfg.seed, static_cast<int>(t));
        const auto a = A.draw(rng);
        Workspace& ws = workspace();
        haar_conjugate_lower(ws.S, B.draw(rng), rng);
        VectorXd r(cfg.N);
        for (int i = 0; i < cfg.N; ++i) r[i] = std::sqrt(std::max(0.0, a[i]));
        for (int j = 0; j < cfg.N; ++j) ws.S.col(j) = ws.S.col(j).cwiseProduct(r) * r[j];
        const auto ev = eigenvalues(ws.S);
        TrialDetail& d = rep.trials[t];
        d.trial = static_cast<int>(t);
        d.ks_distance = ks_distance_to_sample(pred.law, ev);
        d.mean_error = std::abs(mean_of(ev) - pred.mean);
    });
    for (const auto& d : rep.trials) {
        rep.ks_distance += d.ks_distance / cfg.trials;
        rep.mean_error += d.mean_error / cfg.trials;
    }
    return rep;
}

}  // namespace freeprob
