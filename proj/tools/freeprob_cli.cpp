#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <unistd.h>

#include "freeprob/characterizations.hpp"
#include "freeprob/convolution.hpp"
#include "freeprob/families.hpp"
#include "freeprob/matrix_oracle.hpp"
#include "freeprob/measure_json.hpp"
#include "freeprob/transforms.hpp"

using namespace freeprob;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void emit_error(const std::string& type, const std::string& message)
{
    json j{{"schema", "v1"}, {"error", {{"type", type}, {"message", message}}}};
    std::cerr << j.dump() << '\n';
}

// Write to a temporary next to the target, then rename over it.
void write_atomic(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw UsageError("cannot open " + tmp.string() + " for writing");
        out << text;
        out.flush();
        if (!out) throw UsageError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw UsageError("cannot rename onto " + path + ": " + ec.message());
    }
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

SpectralMeasure load_measure(const std::string& path)
{
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(path + ": malformed JSON: " + e.what());
    }
    return measure_from_json(j);
}

json cjson(Complex z) { return json::array({z.real(), z.imag()}); }

Complex parse_complex(const std::string& s)
{
    std::istringstream is(s);
    double re = 0.0, im = 0.0;
    char comma = 0;
    if (!(is >> re)) throw UsageError("bad complex number '" + s + "' (expected re,im)");
    if (is >> comma) {
        if (comma != ',' || !(is >> im)) throw UsageError("bad complex number '" + s + "' (expected re,im)");
    }
    return {re, im};
}

std::string iso_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct Common {
    std::string out;
    bool metadata = false;
};

std::string finish_json(json j, const Common& c)
{
    if (c.metadata) j["metadata"] = {{"generated_at", iso_now()}};
    return j.dump(2) + "\n";
}

json report_json(const VerificationReport& r)
{
    json j{{"schema", "v1"},
           {"theorem_id", r.theorem_id},
           {"pass", r.pass},
           {"residual_sup", r.residual_sup},
           {"tolerance", r.tolerance}};
    j["grid"] = json::array();
    for (Complex z : r.grid) j["grid"].push_back(cjson(z));
    j["s_grid"] = r.s_grid;
    j["details"] = json::array();
    for (const auto& d : r.details)
        j["details"].push_back(
            {{"name", d.name}, {"residual", d.residual}, {"tolerance", d.tolerance}, {"pass", d.pass}});
    j["values"] = json::object();
    for (const auto& [k, v] : r.values) j["values"][k] = v;
    return j;
}

json oracle_json(const OracleReport& r)
{
    json j{{"schema", "v1"},
           {"check", r.check},
           {"config",
            {{"n", r.config.N},
             {"trials", r.config.trials},
             {"seed", r.config.seed},
             {"degree", r.config.projection_degree},
             {"iid", r.config.iid}}},
           {"ks_distance", r.ks_distance},
           {"regression_residual", r.regression_residual},
           {"conditional_variance_residual", r.conditional_variance_residual},
           {"control_residual", r.control_residual},
           {"control_alpha", r.control_alpha},
           {"mean_error", r.mean_error},
           {"variance_coefficients", r.variance_coefficients},
           {"predicted_variance_coefficients", r.predicted_variance_coefficients},
           {"degree_used", r.degree_used},
           {"warnings", r.warnings}};
    j["trials"] = json::array();
    for (const auto& t : r.trials)
        j["trials"].push_back({{"trial", t.trial},
                               {"ks_distance", t.ks_distance},
                               {"regression_residual", t.regression_residual},
                               {"control_residual", t.control_residual},
                               {"conditional_variance_residual", t.conditional_variance_residual},
                               {"mean_error", t.mean_error}});
    return j;
}

json diagnostics_json(const InversionDiagnostics& d)
{
    return {{"recovered_mass", d.recovered_mass},
            {"normalization_defect", d.normalization_defect},
            {"renormalized", d.renormalized},
            {"edge_corrected", d.edge_corrected},
            {"support_lo", d.support_lo},
            {"support_hi", d.support_hi}};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Free probability toolkit: families, transforms, convolutions, verification, matrix oracle"};
    app.require_subcommand(1);
    Common common;
    std::function<int()> action;

    // family
    auto* fam = app.add_subcommand("family", "Emit a family law as JSON");
    std::string kind;
    double a = 0.0, b = 0.0, lambda = 1.0, alpha = 1.0, sigma = 1.0, theta = 1.0;
    std::size_t nodes = kDefaultNodes;
    fam->add_option("--kind", kind, "meixner | mp | binomial")->required()->check(
        CLI::IsMember({"meixner", "mp", "binomial"}));
    fam->add_option("--a", a);
    fam->add_option("--b", b);
    fam->add_option("--lambda", lambda);
    fam->add_option("--alpha", alpha);
    fam->add_option("--sigma", sigma);
    fam->add_option("--theta", theta);
    fam->add_option("--nodes", nodes)->check(CLI::PositiveNumber);
    fam->add_option("--out", common.out);
    fam->add_flag("--metadata", common.metadata);
    fam->callback([&] {
        action = [&] {
            SpectralMeasure m = kind == "meixner" ? meixner_measure({a, b}, nodes)
                                : kind == "mp"    ? mp_measure({lambda, alpha}, nodes)
                                                  : binomial_measure({sigma, theta}, nodes);
            write_atomic(common.out, finish_json(measure_to_json(m), common));
            return kOk;
        };
    });

    // transform
    auto* tr = app.add_subcommand("transform", "Evaluate a transform of a law at given points");
    std::string input, tkind;
    std::vector<std::string> points;
    tr->add_option("--input", input, "measure JSON")->required();
    tr->add_option("--kind", tkind)->required()->check(CLI::IsMember({"G", "L", "phi", "R", "psi", "S"}));
    tr->add_option("--at", points, "points re,im")->required();
    tr->add_option("--out", common.out);
    tr->add_flag("--metadata", common.metadata);
    tr->callback([&] {
        action = [&] {
            const SpectralMeasure m = load_measure(input);
            json j{{"schema", "v1"}, {"transform", tkind}, {"values", json::array()}};
            for (const auto& p : points) {
                const Complex z = parse_complex(p);
                Complex v;
                if (tkind == "G") v = cauchy_G(m, z);
                else if (tkind == "L") v = reciprocal_L(m, z);
                else if (tkind == "phi") v = voiculescu_phi(m, z);
                else if (tkind == "R") v = r_transform(m, z);
                else if (tkind == "psi") v = psi_transform(m, z);
                else v = s_transform(m, z);
                j["values"].push_back({{"z", cjson(z)}, {"value", cjson(v)}});
            }
            write_atomic(common.out, finish_json(j, common));
            return kOk;
        };
    });

    // convolve
    auto* cv = app.add_subcommand("convolve", "Convolve laws given as JSON");
    std::string op, conv_report;
    std::vector<std::string> inputs;
    double t = 1.0;
    cv->add_option("--op", op)->required()->check(
        CLI::IsMember({"add", "mult", "monotone", "boolean-pow", "free-pow"}));
    cv->add_option("--in", inputs, "measure JSON; twice for add, mult and monotone")->required()->expected(1, 2);
    cv->add_option("--t", t, "exponent for boolean-pow and free-pow");
    cv->add_option("--out", common.out);
    cv->add_option("--report", conv_report, "residual diagnostics JSON");
    cv->add_flag("--metadata", common.metadata);
    cv->callback([&] {
        action = [&] {
            const bool binary = op == "add" || op == "mult" || op == "monotone";
            if (binary && inputs.size() != 2) throw UsageError("--op " + op + " takes two --in laws");
            if (!binary && inputs.size() != 1) throw UsageError("--op " + op + " takes one --in law");
            const SpectralMeasure mu = load_measure(inputs[0]);
            json report{{"schema", "v1"}, {"op", op}};
            InversionDiagnostics diag;
            SpectralMeasure law = mu;
            if (op == "add") {
                const SpectralMeasure nu = load_measure(inputs[1]);
                const auto r = free_add(mu, nu);
                const auto sd = subordination_diagnostics(r.subordination, mu, nu, default_verification_grid());
                report["subordination_residual"] = sd.residual_sup;
                report["min_im_gain"] = sd.min_im_gain;
                report["slope_error"] = sd.slope_error;
                law = r.law;
                diag = r.recovery;
            } else if (op == "mult") {
                const auto r = free_mult(mu, load_measure(inputs[1]));
                report["s_residual"] = r.s_residual;
                report["psi_residual"] = r.psi_residual;
                report["mass_at_zero"] = r.mass_at_zero;
                report["mean"] = r.mean;
                law = r.law;
                diag = r.recovery;
            } else if (op == "monotone") {
                const auto r = monotone_add(mu, load_measure(inputs[1]));
                law = r.law;
                diag = r.recovery;
            } else if (op == "free-pow") {
                const auto r = free_add_power(mu, t);
                law = r.law;
                diag = r.recovery;
            } else {
                const auto r = boolean_power(mu, t);
                law = r.law;
                diag = r.recovery;
            }
            json j = measure_to_json(law);
            j["recovery"] = diagnostics_json(diag);
            report["recovery"] = diagnostics_json(diag);
            write_atomic(common.out, finish_json(j, common));
            if (!conv_report.empty()) {
                write_atomic(conv_report, finish_json(report, common));
            }
            return kOk;
        };
    });

    // verify
    auto* vf = app.add_subcommand("verify", "Verify a characterization numerically");
    std::string theorem;
    double va = 0.0, vb = 0.0, valpha = 0.5, tol = -1.0, c = 0.5, d = 0.5, vlambda = 2.0, vsigma = 1.0,
           vtheta = 1.0, alpha1 = std::numeric_limits<double>::quiet_NaN();
    int n_lemma = 6, samples = 1000;
    vf->add_option("--theorem", theorem)->required()->check(CLI::IsMember({"4", "5", "6", "7", "lemma1", "psi_tr2"}));
    vf->add_option("--alpha", valpha, "regression weight (4, 5) or jump size (6)");
    vf->add_option("--a", va);
    vf->add_option("--b", vb);
    vf->add_option("--lambda", vlambda);
    vf->add_option("--sigma", vsigma);
    vf->add_option("--theta", vtheta);
    vf->add_option("--c", c);
    vf->add_option("--d", d);
    vf->add_option("--alpha1", alpha1, "psi(1); solved self-consistently when omitted");
    vf->add_option("--n", n_lemma);
    vf->add_option("--samples", samples)->check(CLI::PositiveNumber);
    vf->add_option("--tol", tol)->check(CLI::PositiveNumber);
    vf->add_option("--report", common.out);
    vf->add_flag("--metadata", common.metadata);
    vf->callback([&] {
        action = [&] {
            VerificationReport r;
            if (theorem == "4" || theorem == "5") {
                const auto spec = RegressionSpec::from_alpha(valpha, va, vb);
                const double tl = tol > 0 ? tol : 1e-7;
                r = theorem == "4" ? verify_free_laha_lukacs(spec, default_verification_grid(), tl)
                                   : verify_monotone_laha_lukacs(spec, default_verification_grid(), tl);
            } else if (theorem == "6") {
                PoissonBinomialParams p{vlambda, valpha, vsigma, vtheta};
                if (vf->count("--c") || vf->count("--d")) p = thm6_params(c, d, vlambda);
                r = verify_poisson_binomial(p, default_s_grid(), tol > 0 ? tol : 1e-5);
            } else if (theorem == "7") {
                double a1 = alpha1;
                int iters = 0;
                if (std::isnan(a1)) {
                    const auto fp = solve_thm7_alpha1(c, d);
                    a1 = fp.alpha1;
                    iters = fp.iterations;
                }
                r = verify_beta_characterization(c, d, a1, default_s_grid(), tol > 0 ? tol : 1e-5);
                if (iters > 0) r.values.emplace_back("alpha1_iterations", iters);
            } else {
                const double tl = tol > 0 ? tol : 1e-12;
                r.theorem_id = theorem;
                r.tolerance = tl;
                r.add(theorem, theorem == "lemma1" ? lemma1_identity_check(n_lemma, samples)
                                                   : psi_tr2_identity_check(samples),
                      tl);
                r.residual_sup = r.details.front().residual;
                r.pass = r.details.front().pass;
            }
            write_atomic(common.out, finish_json(report_json(r), common));
            return r.pass ? kOk : kFail;
        };
    });

    // oracle
    auto* orc = app.add_subcommand("oracle", "Random-matrix check of free convolutions and regressions");
    std::string check;
    MatrixEnsembleConfig mcfg;
    std::string oleft, oright;
    double oalpha = 0.5, oa = 0.0, ob = 0.0;
    orc->add_option("--check", check)->required()->check(CLI::IsMember({"add", "mult", "regression"}));
    orc->add_option("--n", mcfg.N)->check(CLI::Range(16, 1 << 14));
    orc->add_option("--trials", mcfg.trials)->check(CLI::PositiveNumber);
    orc->add_option("--seed", mcfg.seed);
    orc->add_option("--degree", mcfg.projection_degree)->check(CLI::Range(2, 16));
    orc->add_flag("--iid", mcfg.iid);
    orc->add_option("--left", oleft, "measure JSON (default: semicircle for add, MP(1,1) for mult)");
    orc->add_option("--right", oright, "measure JSON (default: semicircle for add, binomial(1,1) for mult)");
    orc->add_option("--alpha", oalpha);
    orc->add_option("--a", oa);
    orc->add_option("--b", ob);
    orc->add_option("--report", common.out);
    orc->add_flag("--metadata", common.metadata);
    orc->callback([&] {
        action = [&] {
            OracleReport r;
            bool pass = false;
            if (check == "regression") {
                r = conditional_regression_check(RegressionSpec::from_alpha(oalpha, oa, ob), mcfg);
                pass = r.regression_residual < 0.05 && r.control_residual > 3.0 * r.regression_residual;
            } else if (check == "add") {
                const SpectralMeasure mu = oleft.empty() ? meixner_measure({0, 0}) : load_measure(oleft);
                const SpectralMeasure nu = oright.empty() ? meixner_measure({0, 0}) : load_measure(oright);
                r = empirical_free_add(mu, nu, mcfg);
                pass = r.ks_distance < 0.05;
            } else {
                const SpectralMeasure mu = oleft.empty() ? mp_measure({1, 1}) : load_measure(oleft);
                const SpectralMeasure nu = oright.empty() ? binomial_measure({1, 1}) : load_measure(oright);
                r = empirical_free_mult(mu, nu, mcfg);
                pass = r.ks_distance < 0.05;
            }
            json j = oracle_json(r);
            j["pass"] = pass;
            write_atomic(common.out, finish_json(j, common));
            return pass ? kOk : kFail;
        };
    });

    // density
    auto* den = app.add_subcommand("density", "Write (x, density) CSV and the atom table of a law");
    std::string din, atoms_out;
    den->add_option("--input", din)->required();
    den->add_option("--out", common.out);
    den->add_option("--atoms", atoms_out, "separate CSV for atoms; appended as a second table when omitted");
    den->callback([&] {
        action = [&] {
            const SpectralMeasure m = load_measure(din);
            std::ostringstream dens, at;
            dens << std::setprecision(17) << "x,density\n";
            if (const auto& ac = m.ac())
                for (std::size_t i = 0; i < ac->nodes.size(); ++i) dens << ac->nodes[i] << ',' << ac->values[i] << '\n';
            at << std::setprecision(17) << "x,mass\n";
            for (const auto& atom : m.atoms()) at << atom.location << ',' << atom.mass << '\n';
            if (atoms_out.empty()) {
                write_atomic(common.out, dens.str() + "\n" + at.str());
            } else {
                write_atomic(common.out, dens.str());
                write_atomic(atoms_out, at.str());
            }
            return kOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return kUsage;
    }

    try {
        return action();
    } catch (const UsageError& e) {
        emit_error("usage", e.what());
        return kUsage;
    } catch (const InadmissibleError& e) {
        emit_error("inadmissible", e.what());
        return kUsage;
    } catch (const InvalidMeasure& e) {
        emit_error("invalid_measure", e.what());
        return kUsage;
    } catch (const DomainError& e) {
        emit_error("domain", e.what());
        return kUsage;
    } catch (const ConvergenceError& e) {
        emit_error("convergence", e.what());
        return kFail;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return kFail;
    }
}
