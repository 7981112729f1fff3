#pragma once

// Shared model fixtures: bundled configurations and a lattice with
// (numerically) frozen dynamics.

#include <filesystem>
#include <string>

#include "volspec/config.hpp"
#include "volspec/model.hpp"

namespace fixture {

inline volspec::ModelConfig bundled(const std::string& name) {
    return volspec::load_model_config(std::filesystem::path(VOLSPEC_CONFIG_DIR) / (name + ".json"));
}

// Calibrated layout with every volatility parameter shrunk to 1e-7 and no
// jumps: the forward barely moves.
inline volspec::ModelConfig frozen() {
    auto cfg = volspec::ModelConfig::calibrated_defaults();
    for (auto& r : cfg.regimes) {
        r.sigma = 1e-7;
        r.nu_minus = 0.0;
        r.nu_plus = 0.0;
    }
    return cfg;
}

}  // namespace fixture
