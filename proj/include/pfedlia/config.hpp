#pragma once

#include <string>

#include "json.hpp"
#include "pfedlia/orchestrator.hpp"

namespace pfedlia {

// Loads an experiment config from a JSON file. Unknown keys are rejected by
// name; all defaults are resolved into the returned struct. A manifest.json
// written by a previous run (recognised by its "config_snapshot" key) is also
// accepted and reproduces that run.
ExperimentConfig load_config(const std::string& path);

ExperimentConfig parse_config(const nlohmann::json& j);

// Full resolved snapshot; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// FNV-1a hash of the canonical snapshot, hex-encoded.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace pfedlia
