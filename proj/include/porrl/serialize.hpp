#pragma once

#include <json.hpp>

#include "porrl/core.hpp"

namespace porrl {

/// JSON document with field names mirroring PormdpSpec; tensors as nested arrays.
nlohmann::json spec_to_json(const PormdpSpec& spec);

/// Parses and validates a spec document. Unknown keys are rejected with SpecError.
PormdpSpec spec_from_json(const nlohmann::json& doc);

/// Throws SpecError naming every key of `obj` not listed in `allowed`.
void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where);

}  // namespace porrl
