#pragma once

#include "bmsim/audit.hpp"
#include "bmsim/converters.hpp"
#include "bmsim/network.hpp"
#include "bmsim/sim.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace bmsim {

using Json = nlohmann::json;

/// A validated scenario file, fully resolved: every default materialized,
/// setpoint and derived initial conditions included.
struct ResolvedScenario {
    Scenario scenario;
    Json resolved;
    std::string name;
    std::optional<AssembledNetwork> network;  // kind == network only
    std::optional<ConverterParams> converter; // converter kinds only
};

/// Parses and validates a scenario document. Unknown keys are rejected with
/// the offending key path; parse errors carry line numbers.
ResolvedScenario resolve_scenario(const Json& doc);
ResolvedScenario load_scenario_file(const std::string& path);

/// Serializes a resolved document (numbers round-trip exactly).
std::string scenario_to_string(const Json& doc);

/// The seven figure presets, caption and table parameters in SI units.
Json preset_scenario(const std::string& name);
const std::vector<std::string>& preset_names();

}  // namespace bmsim
