#pragma once

// Declarative experiment configuration: YAML in, canonical JSON out.
//
// Sections: params, couplings, grid, scheme, ensemble, initial, fbar, output.
// Unknown sections or keys are rejected.

#include <string>

#include "json.hpp"
#include "slowfast/experiments.hpp"

namespace slowfast {

inline constexpr const char* kOutputDirEnv = "SLOWFAST_OUTPUT_DIR";

// Built-in defaults; the output directory comes from SLOWFAST_OUTPUT_DIR when set.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);

// Overrides one scalar or list field addressed as "section.key"; lists are comma separated.
void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
std::string config_to_yaml(const ExperimentConfig& cfg);

}  // namespace slowfast
