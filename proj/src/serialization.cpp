#include "fdkg/serialization.hpp"

#include <cmath>

namespace fdkg::channel {

void to_json(nlohmann::json& j, const EnvironmentSpec& spec) {
  j = nlohmann::json{{"env_id", spec.env_id},
                     {"n_paths_range", {spec.min_paths, spec.max_paths}},
                     {"delay_spread_s", spec.delay_spread_s},
                     {"gain_decay", spec.gain_decay},
                     {"delay_jitter_s", spec.delay_jitter_s},
                     {"gain_floor", spec.gain_floor},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, EnvironmentSpec& spec) {
  spec.env_id = j.value("env_id", spec.env_id);
  if (j.contains("n_paths_range")) {
    const auto& range = j.at("n_paths_range");
    if (!range.is_array() || range.size() != 2) {
      throw nlohmann::json::type_error::create(302, "n_paths_range must be [min, max]", &j);
    }
    spec.min_paths = range[0].get<int>();
    spec.max_paths = range[1].get<int>();
  }
  spec.delay_spread_s = j.value("delay_spread_s", spec.delay_spread_s);
  spec.gain_decay = j.value("gain_decay", spec.gain_decay);
  spec.delay_jitter_s = j.value("delay_jitter_s", spec.delay_jitter_s);
  spec.gain_floor = j.value("gain_floor", spec.gain_floor);
  spec.seed = j.value("seed", spec.seed);
}

void to_json(nlohmann::json& j, const OfdmConfig& cfg) {
  j = nlohmann::json{{"f_ul_hz", cfg.f_ul_hz},
                     {"f_dl_hz", cfg.f_dl_hz},
                     {"n_subcarriers", cfg.n_subcarriers},
                     {"bandwidth_hz", cfg.bandwidth_hz}};
}

void from_json(const nlohmann::json& j, OfdmConfig& cfg) {
  cfg.f_ul_hz = j.value("f_ul_hz", cfg.f_ul_hz);
  cfg.f_dl_hz = j.value("f_dl_hz", cfg.f_dl_hz);
  cfg.n_subcarriers = j.value("n_subcarriers", cfg.n_subcarriers);
  cfg.bandwidth_hz = j.value("bandwidth_hz", cfg.bandwidth_hz);
}

nlohmann::json snr_to_json(double snr_db) {
  if (std::isinf(snr_db)) return nullptr;
  return snr_db;
}

double snr_from_json(const nlohmann::json& j) {
  if (j.is_null()) return kNoiseDisabled;
  return j.get<double>();
}

}  // namespace fdkg::channel
