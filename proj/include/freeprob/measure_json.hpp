#pragma once

#include <string>

#include <json.hpp>

#include "freeprob/measure.hpp"

namespace freeprob {

/// {"schema":"v1","atoms":[{"x","mass"}],"ac":{"lo","hi","nodes","values"}}; "ac" omitted when absent.
nlohmann::json measure_to_json(const SpectralMeasure& m);
/// Throws DomainError on malformed input and InvalidMeasure when the parsed law fails validation.
SpectralMeasure measure_from_json(const nlohmann::json& j);

std::string measure_to_string(const SpectralMeasure& m);
SpectralMeasure measure_from_string(const std::string& text);

}  // namespace freeprob
