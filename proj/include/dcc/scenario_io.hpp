#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dcc/scenario.hpp"

namespace dcc {

using Json = nlohmann::ordered_json;

// JSON scenario format: explicit dimensions, row-major matrices.
// Required: n, m, l, horizon, q, Z, destinations, atoms, initial.
// Optional: steps (0 = solver default), mode ("cooperative" default),
// solver block, seed. Parsing validates and throws ValidationError with the
// offending field's name.
Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace dcc
