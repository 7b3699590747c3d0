#include "freeprob/measure_json.hpp"

namespace freeprob {

namespace {

double number(const nlohmann::json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
        throw DomainError(std::string("measure JSON: missing numeric field '") + key + "'");
    return j.at(key).get<double>();
}

std::vector<double> numbers(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || !j.at(key).is_array())
        throw DomainError(std::string("measure JSON: missing array field '") + key + "'");
    std::vector<double> out;
    out.reserve(j.at(key).size());
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw DomainError(std::string("measure JSON: non-numeric entry in '") + key + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

nlohmann::json measure_to_json(const SpectralMeasure& m)
{
    nlohmann::json j;
    j["schema"] = "v1";
    j["atoms"] = nlohmann::json::array();
    for (const auto& a : m.atoms()) j["atoms"].push_back({{"x", a.location}, {"mass", a.mass}});
    if (const auto& ac = m.ac()) {
        j["ac"] = {{"lo", ac->support_lo}, {"hi", ac->support_hi}, {"nodes", ac->nodes}, {"values", ac->values}};
    }
    return j;
}

SpectralMeasure measure_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw DomainError("measure JSON: top level must be an object");
    if (j.contains("schema") && j.at("schema") != "v1") throw DomainError("measure JSON: unsupported schema");
    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
        if (!j.at("atoms").is_array()) throw DomainError("measure JSON: 'atoms' must be an array");
        for (const auto& a : j.at("atoms")) atoms.push_back({number(a, "x"), number(a, "mass")});
    }
    std::optional<DensityGrid> ac;
    if (j.contains("ac") && !j.at("ac").is_null()) {
        const auto& g = j.at("ac");
        DensityGrid d;
        d.support_lo = number(g, "lo");
        d.support_hi = number(g, "hi");
        d.nodes = numbers(g, "nodes");
        d.values = numbers(g, "values");
        ac = std::move(d);
    }
    if (atoms.empty() && !ac) throw DomainError("measure JSON: neither atoms nor density present");
    return SpectralMeasure(std::move(atoms), std::move(ac));
}

std::string measure_to_string(const SpectralMeasure& m) { return measure_to_json(m).dump(); }

SpectralMeasure measure_from_string(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("measure JSON: ") + e.what());
    }
    return measure_from_json(j);
}

}  // namespace freeprob
