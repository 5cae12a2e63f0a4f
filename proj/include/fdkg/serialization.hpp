#pragma once

#include "json.hpp"

#include "fdkg/channel_sim.hpp"

// JSON mappings for the configuration value types. Field names match the
// struct members; missing fields keep their defaults.
namespace fdkg::channel {

void to_json(nlohmann::json& j, const EnvironmentSpec& spec);
void from_json(const nlohmann::json& j, EnvironmentSpec& spec);
void to_json(nlohmann::json& j, const OfdmConfig& cfg);
void from_json(const nlohmann::json& j, OfdmConfig& cfg);

/// SNR values are written as numbers, with null standing for "noise disabled".
nlohmann::json snr_to_json(double snr_db);
double snr_from_json(const nlohmann::json& j);

}  // namespace fdkg::channel
