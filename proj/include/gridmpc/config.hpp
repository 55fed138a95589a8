#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridmpc/simulation.hpp"

namespace gridmpc {

class ConfigError : public Error {
  public:
    using Error::Error;
};

struct ScenarioConfig {
    Scenario scenario;
    std::string preset;  // empty when none was used
    // Conventional-control inputs exactly as written (MW/Hz ratings) before
    // conversion to the per-unit frame.
    nlohmann::json raw_units = nlohmann::json::object();
};

struct PresetInfo {
    std::string name;
    std::string description;
};

std::vector<PresetInfo> list_presets();
// Fully explicit JSON for a built-in preset. Throws ConfigError if unknown.
nlohmann::json preset_json(const std::string& name);

// Parses a JSON scenario. A top-level "preset" key selects the base; every
// other key overrides it (objects merge, arrays replace). A top-level
// "manifest" object is informational and ignored, so manifests can be fed
// back as configs. Relative fault-file paths resolve against base_dir.
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

// Reads a config file, or a preset when the argument names one.
ScenarioConfig load_config(const std::string& path_or_preset);

// Canonical JSON for a scenario; parse_config(scenario_json(s)) == s.
nlohmann::json scenario_json(const Scenario& s);

// scenario_json plus a "manifest" block with the software version, derived
// quantities and reference values.
nlohmann::json build_manifest(const ScenarioConfig& cfg);

std::string software_version();

}  // namespace gridmpc
