// Shared test fixtures: the rig configuration with the wake constants that
// `vivrl calibrate` selects for configs/default.cfg.
#pragma once

#include <filesystem>
#include <string>

#include "vivrl/config.hpp"

namespace vivrl::testing {

inline std::filesystem::path source_dir() { return VIVRL_SOURCE_DIR; }

inline std::filesystem::path default_config_path() { return source_dir() / "configs" / "default.cfg"; }

inline plant::WakeModelParams calibrated_wake(plant::WakeModelParams w = {}) {
    w.vdp_epsilon = 2.0;
    w.coupling_A = 20.0;
    w.base_lift_coeff = 0.6;
    w.fluid_damping_coeff = 0.4;
    w.rotation_coupling = 4.5;
    return w;
}

inline config::ExperimentConfig calibrated_config() {
    config::ExperimentConfig c = config::load(default_config_path());
    c.wake = calibrated_wake(c.wake);
    return c;
}

}  // namespace vivrl::testing
