#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace macroreal::commands {

// Floats rounded to six significant digits; keys are already sorted by
// nlohmann::json's map storage.
nlohmann::json canonical(const nlohmann::json& j);

// Two-space indented canonical text with a trailing newline.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace macroreal::commands
