#pragma once

// JSON experiment configuration with a strict schema. Every key is checked;
// unknown keys and invalid values raise Error(Errc::config) naming the key.

#include <string>
#include <vector>

#include <json.hpp>

#include "ojapca/harness.hpp"

namespace ojapca {

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Throws Error(Errc::config) for the first violated constraint.
void validate(const ExperimentConfig& config);

/// Applies "a.b.c=value" to doc; value is parsed as JSON, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the file, applies overrides in order, parses and validates.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace ojapca
