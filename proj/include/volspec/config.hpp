#pragma once

// JSON model configuration:
// {
//   "grid": {"n": 76, "spot": 100, "top": 10000, "bottom": 1, "stretch": 4},
//   "regimes": [{"sigma", "beta", "sigma_bar", "nu_plus", "nu_minus", "level"}, ...],
//   "switch_generators": [[[...], ...], ...],
//   "time_change": [[t, f], ...],            (optional, identity if absent)
//   "discount": {"r": 0.0, "q": 0.0},        (numbers or [[t, v], ...])
//   "start_regime": 1,
//   "cev_reference": 100,                    (optional)
//   "description": "..."                     (optional)
// }
// Missing grid fields and an absent discount block take the defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "volspec/model.hpp"

namespace volspec {

// Throws ConfigError naming the line (syntax errors) or the field.
ModelConfig parse_model_config(std::string_view text, const std::string& source = "<string>");
ModelConfig load_model_config(const std::filesystem::path& path);

// Canonical JSON text of a config (sorted keys, full precision).
std::string model_config_json(const ModelConfig& config, int indent = 2);

// FNV-1a 64 of the canonical JSON, as 16 hex digits. Formatting of the
// source file does not affect it.
std::string config_hash(const ModelConfig& config);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace volspec
