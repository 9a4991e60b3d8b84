// Experiment configuration: flat dotted key = value files, derived parameter
// sets, config hashing, calibration overlays and actor-critic checkpoints.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vivrl/actuator.hpp"
#include "vivrl/baseline.hpp"
#include "vivrl/calibration.hpp"
#include "vivrl/control_loop.hpp"
#include "vivrl/error.hpp"
#include "vivrl/plant.hpp"
#include "vivrl/ppo.hpp"
#include "vivrl/rl_core.hpp"

namespace vivrl::config {

struct ExperimentConfig {
    // Structure. K and C follow from f_n and ζ_air unless given explicitly.
    plant::CylinderProperties cylinder;
    double natural_frequency_hz = 1.96;
    double zeta_air = 1.02e-2;
    plant::StiffnessBasis basis = plant::StiffnessBasis::in_water;
    plant::FlowConditions flow;
    double reduced_velocity = 7.5;  ///< flow for training and evaluation
    plant::WakeModelParams wake;

    actuator::MotorParams motor;
    double alpha_at_limit = 2.0;  ///< |α| at full duty, at the training flow; 0 → use motor.omega_max_rad_per_s

    ppo::PpoConfig ppo;
    loop::EpisodeConfig episode;
    int n_past_actions = 2;
    int episodes = 400;
    std::vector<std::size_t> hidden{64, 64};
    rl::Activation activation = rl::Activation::tanh;
    double init_log_std = ppo::kInitLogStd;

    baseline::PidTuning pid;
    calib::LockInTargets lock_in;
    calib::LockOnTargets lock_on;
    calib::CalibrationGrid grid;

    std::uint64_t seed = 1;
    std::string output_dir;        ///< empty → $VIVRL_OUT, then "vivrl_out"
    std::string calibration_file;  ///< empty → <output root>/calibrated_wake.params
};

// ---------------------------------------------------------------------------
// Value codecs
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <class T>
bool parse_number(std::string_view s, T &out) {
    const auto *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto stop = comma == std::string_view::npos ? s.size() : comma;
        out.push_back(trim(s.substr(start, stop - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

/// One config key: how to read it into the struct and how to print it back.
struct Binding {
    std::string key;
    std::function<bool(std::string_view)> set;  ///< false when the text does not parse
    std::function<std::string()> get;
    bool hashed = true;  ///< excluded keys (seed, paths) do not change the config hash
};

namespace detail {

inline Binding real(std::string key, double &v) {
    return {std::move(key), [&v](std::string_view s) { return parse_number(s, v) && std::isfinite(v); },
            [&v] { return fmt(v); }};
}

inline Binding integer(std::string key, int &v) {
    return {std::move(key), [&v](std::string_view s) { return parse_number(s, v); },
            [&v] { return std::to_string(v); }};
}

inline Binding flag(std::string key, bool &v) {
    return {std::move(key),
            [&v](std::string_view s) {
                if (s == "true" || s == "1") v = true;
                else if (s == "false" || s == "0") v = false;
                else return false;
                return true;
            },
            [&v] { return std::string(v ? "true" : "false"); }};
}

inline Binding reals(std::string key, std::vector<double> &v) {
    return {std::move(key),
            [&v](std::string_view s) {
                std::vector<double> tmp;
                for (const auto &item : split_list(s)) {
                    double x = 0;
                    if (!parse_number(std::string_view(item), x) || !std::isfinite(x)) return false;
                    tmp.push_back(x);
                }
                v = std::move(tmp);
                return true;
            },
            [&v] {
                std::string out;
                for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
                return out;
            }};
}

inline Binding sizes(std::string key, std::vector<std::size_t> &v) {
    return {std::move(key),
            [&v](std::string_view s) {
                std::vector<std::size_t> tmp;
                for (const auto &item : split_list(s)) {
                    std::size_t x = 0;
                    if (!parse_number(std::string_view(item), x)) return false;
                    tmp.push_back(x);
                }
                v = std::move(tmp);
                return true;
            },
            [&v] {
                std::string out;
                for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
                return out;
            }};
}

inline Binding text(std::string key, std::string &v) {
    return {std::move(key), [&v](std::string_view s) { v = std::string(s); return true; }, [&v] { return v; },
            false};
}

}  // namespace detail

/// Every recognized key, in canonical order.
[[nodiscard]] inline std::vector<Binding> bindings(ExperimentConfig &c) {
    using namespace detail;
    std::vector<Binding> b;
    b.push_back(real("plant.diameter_m", c.cylinder.diameter_m));
    b.push_back(real("plant.immersed_length_m", c.cylinder.immersed_length_m));
    b.push_back(real("plant.oscillating_mass_kg", c.cylinder.oscillating_mass_kg));
    b.push_back(real("plant.displaced_mass_kg", c.cylinder.displaced_mass_kg));
    b.push_back(real("plant.natural_frequency_hz", c.natural_frequency_hz));
    b.push_back(real("plant.zeta_air", c.zeta_air));
    b.push_back(real("plant.stiffness_N_per_m", c.cylinder.stiffness_N_per_m));
    b.push_back(real("plant.damping_Ns_per_m", c.cylinder.structural_damping_Ns_per_m));
    b.push_back({"plant.stiffness_basis",
                 [&c](std::string_view s) {
                     if (s == "in_water") c.basis = plant::StiffnessBasis::in_water;
                     else if (s == "in_air") c.basis = plant::StiffnessBasis::in_air;
                     else return false;
                     return true;
                 },
                 [&c] { return std::string(c.basis == plant::StiffnessBasis::in_water ? "in_water" : "in_air"); }});
    b.push_back(real("flow.density_kg_per_m3", c.flow.density_kg_per_m3));
    b.push_back(real("flow.strouhal", c.flow.strouhal));
    b.push_back(real("flow.reduced_velocity", c.reduced_velocity));
    b.push_back(real("wake.vdp_epsilon", c.wake.vdp_epsilon));
    b.push_back(real("wake.coupling_A", c.wake.coupling_A));
    b.push_back(real("wake.base_lift_coeff", c.wake.base_lift_coeff));
    b.push_back(real("wake.rotation_coupling", c.wake.rotation_coupling));
    b.push_back(real("wake.added_mass_coeff", c.wake.added_mass_coeff));
    b.push_back(real("wake.fluid_damping_coeff", c.wake.fluid_damping_coeff));
    b.push_back(real("wake.magnus_coeff", c.wake.magnus_coeff));
    b.push_back(real("wake.magnus_lag_convective", c.wake.magnus_lag_convective));
    b.push_back(real("motor.omega_max_rad_per_s", c.motor.omega_max_rad_per_s));
    b.push_back(real("motor.alpha_at_limit", c.alpha_at_limit));
    b.push_back(real("motor.lag_tau_s", c.motor.lag_tau_s));
    b.push_back(real("motor.duty_limit", c.motor.duty_limit));
    b.push_back(real("motor.deadband", c.motor.deadband));
    b.push_back(real("ppo.gamma", c.ppo.gamma));
    b.push_back(real("ppo.gae_lambda", c.ppo.gae_lambda));
    b.push_back(real("ppo.clip_eps", c.ppo.clip_eps));
    b.push_back(integer("ppo.epochs_per_update", c.ppo.epochs_per_update));
    b.push_back(integer("ppo.minibatch_size", c.ppo.minibatch_size));
    b.push_back(real("ppo.lr_actor", c.ppo.lr_actor));
    b.push_back(real("ppo.lr_critic", c.ppo.lr_critic));
    b.push_back(real("ppo.entropy_coef", c.ppo.entropy_coef));
    b.push_back(real("ppo.value_coef", c.ppo.value_coef));
    b.push_back(flag("ppo.normalize_advantages", c.ppo.normalize_advantages));
    b.push_back(integer("loop.n_past_actions", c.n_past_actions));
    b.push_back(integer("loop.steps_per_episode", c.episode.steps_per_episode));
    b.push_back(real("loop.action_interval_s", c.episode.action_interval_s));
    b.push_back(real("loop.duration_periods", c.episode.duration_periods));
    b.push_back(flag("loop.reward_interval_mean", c.episode.reward_interval_mean));
    b.push_back(flag("loop.random_initial_phase", c.episode.random_initial_phase));
    b.push_back(real("loop.abort_reward", c.episode.abort_reward));
    b.push_back(integer("loop.command_delay_steps", c.episode.command_delay_steps));
    b.push_back(real("loop.obs_noise_y", c.episode.obs_noise_y));
    b.push_back(real("loop.obs_noise_ydot", c.episode.obs_noise_ydot));
    b.push_back(real("loop.eval_duration_s", c.episode.eval_duration_s));
    b.push_back(real("loop.eval_lead_in_s", c.episode.eval_lead_in_s));
    b.push_back(integer("train.episodes", c.episodes));
    b.push_back(sizes("train.hidden", c.hidden));
    b.push_back({"train.activation",
                 [&c](std::string_view s) {
                     try {
                         c.activation = rl::activation_from_string(std::string(s));
                     } catch (const Error &) {
                         return false;
                     }
                     return true;
                 },
                 [&c] { return std::string(rl::to_string(c.activation)); }});
    b.push_back(real("train.init_log_std", c.init_log_std));
    b.push_back(real("pid.interval_s", c.pid.interval_s));
    b.push_back(real("pid.bandwidth_multiple", c.pid.bandwidth_multiple));
    b.push_back(reals("lockin.u_grid", c.lock_in.u_grid));
    b.push_back(real("lockin.peak_a_over_d", c.lock_in.peak_a_over_d));
    b.push_back(real("lockin.peak_tolerance", c.lock_in.peak_tolerance));
    b.push_back(real("lockin.band_lo_u", c.lock_in.band_lo_u));
    b.push_back(real("lockin.band_hi_u", c.lock_in.band_hi_u));
    b.push_back(real("lockin.band_threshold", c.lock_in.band_threshold));
    b.push_back(real("lockin.cover_lo_u", c.lock_in.cover_lo_u));
    b.push_back(real("lockin.cover_hi_u", c.lock_in.cover_hi_u));
    b.push_back(real("lockon.reduced_velocity", c.lock_on.reduced_velocity));
    b.push_back(real("lockon.alpha0", c.lock_on.alpha0));
    b.push_back(reals("lockon.ratios", c.lock_on.ratios));
    b.push_back(real("lockon.peak_ratio", c.lock_on.peak_ratio));
    b.push_back(real("lockon.peak_a_over_d", c.lock_on.peak_a_over_d));
    b.push_back(real("lockon.peak_tolerance", c.lock_on.peak_tolerance));
    b.push_back(real("lockon.dip_ratio", c.lock_on.dip_ratio));
    b.push_back(real("lockon.dip_margin", c.lock_on.dip_margin));
    b.push_back(real("lockon.high_ratio", c.lock_on.high_ratio));
    b.push_back(real("lockon.high_ratio_max", c.lock_on.high_ratio_max));
    b.push_back(reals("calibrate.vdp_epsilon", c.grid.vdp_epsilon));
    b.push_back(reals("calibrate.coupling_A", c.grid.coupling_A));
    b.push_back(reals("calibrate.base_lift_coeff", c.grid.base_lift_coeff));
    b.push_back(reals("calibrate.fluid_damping_coeff", c.grid.fluid_damping_coeff));
    b.push_back(reals("calibrate.rotation_coupling", c.grid.rotation_coupling));
    Binding seed{"seed", [&c](std::string_view s) { return detail::parse_number(s, c.seed); },
                 [&c] { return std::to_string(c.seed); }, false};
    b.push_back(std::move(seed));
    b.push_back(text("output_dir", c.output_dir));
    b.push_back(text("calibration.file", c.calibration_file));
    return b;
}

// ---------------------------------------------------------------------------
// Derived parameter sets
// ---------------------------------------------------------------------------

/// Plant with K, C resolved and the flow at reduced velocity U.
[[nodiscard]] inline plant::PlantParams plant_at(const ExperimentConfig &c, double U) {
    plant::PlantParams p;
    p.cylinder = c.cylinder;
    p.flow = c.flow;
    p.wake = c.wake;
    p.basis = c.basis;
    if (!(p.cylinder.stiffness_N_per_m > 0))
        p.cylinder.stiffness_N_per_m = plant::stiffness_for_frequency(c.natural_frequency_hz, p.cylinder, p.wake, c.basis);
    if (!(p.cylinder.structural_damping_Ns_per_m > 0))
        p.cylinder.structural_damping_Ns_per_m =
            2.0 * c.zeta_air * std::sqrt(p.cylinder.stiffness_N_per_m * p.cylinder.oscillating_mass_kg);
    return plant::at_reduced_velocity(p, U);
}

[[nodiscard]] inline plant::PlantParams plant_params(const ExperimentConfig &c) {
    return plant_at(c, c.reduced_velocity);
}

/// Motor whose speed limit corresponds to |α| = alpha_at_limit at the training flow.
[[nodiscard]] inline actuator::MotorParams motor_params(const ExperimentConfig &c) {
    actuator::MotorParams m = c.motor;
    m.command_interval_s = c.episode.action_interval_s;
    if (c.alpha_at_limit > 0) {
        const plant::PlantParams p = plant_params(c);
        m.omega_max_rad_per_s =
            actuator::omega_max_for_alpha(c.alpha_at_limit, p.flow.velocity_m_per_s, p.cylinder.diameter_m);
    }
    return m;
}

[[nodiscard]] inline loop::Environment environment(const ExperimentConfig &c) {
    return loop::make_environment(plant_params(c), motor_params(c), c.n_past_actions, c.episode);
}

[[nodiscard]] inline loop::TrainConfig train_config(const ExperimentConfig &c) {
    loop::TrainConfig t;
    t.env = environment(c);
    t.ppo = c.ppo;
    t.episodes = c.episodes;
    t.seed = c.seed;
    t.hidden = c.hidden;
    t.activation = c.activation;
    t.init_log_std = c.init_log_std;
    return t;
}

/// Lock-on sweep setup at the configured sweep flow and forcing amplitude.
[[nodiscard]] inline baseline::LockOnSetup lock_on_setup(const ExperimentConfig &c) {
    return baseline::make_lock_on_setup(plant_at(c, c.lock_on.reduced_velocity), motor_params(c), c.pid,
                                        c.lock_on.alpha0);
}

// ---------------------------------------------------------------------------
// Validation, parsing, hashing
// ---------------------------------------------------------------------------

/// Checks every setting; the error lists each offending key with its reason.
inline void validate(const ExperimentConfig &c) {
    std::vector<std::string> bad;
    auto check = [&](bool ok, const std::string &key, const std::string &why) {
        if (!ok) bad.push_back(key + ": " + why);
    };
    auto section = [&](const std::string &key, const auto &fn) {
        try {
            fn();
        } catch (const Error &e) {
            bad.push_back(key + ": " + e.what());
        }
    };
    check(c.natural_frequency_hz > 0, "plant.natural_frequency_hz", "must be positive");
    check(c.zeta_air > 0 && c.zeta_air < 1, "plant.zeta_air", "must lie in (0, 1)");
    check(c.cylinder.stiffness_N_per_m >= 0, "plant.stiffness_N_per_m", "must be non-negative (0 derives it)");
    check(c.cylinder.structural_damping_Ns_per_m >= 0, "plant.damping_Ns_per_m",
          "must be non-negative (0 derives it)");
    check(c.reduced_velocity >= 2 && c.reduced_velocity <= 12, "flow.reduced_velocity", "must lie in [2, 12]");
    check(c.alpha_at_limit >= 0, "motor.alpha_at_limit", "must be non-negative");
    check(c.n_past_actions >= 0 && c.n_past_actions <= 8, "loop.n_past_actions", "must lie in [0, 8]");
    check(c.episodes >= 0, "train.episodes", "must be non-negative");
    check(!c.hidden.empty() && std::all_of(c.hidden.begin(), c.hidden.end(), [](auto h) { return h > 0; }),
          "train.hidden", "needs at least one positive layer width");
    check(c.init_log_std >= rl::kLogStdMin && c.init_log_std <= rl::kLogStdMax, "train.init_log_std",
          "must lie in [-5, 2]");
    check(c.lock_on.alpha0 != 0.0, "lockon.alpha0", "must be non-zero");
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto &b : bad) msg += "\n  " + b;
        throw ConfigError(msg);
    }
    section("plant", [&] { plant_params(c).validate(); });
    section("plant.diameter_m/immersed_length_m/masses", [&] { plant_params(c).cylinder.validate(); });
    section("flow", [&] { plant_params(c).flow.validate(); });
    section("motor", [&] { motor_params(c).validate(); });
    section("ppo", [&] { c.ppo.validate(); });
    section("loop", [&] { environment(c).validate(); });
    section("pid", [&] { c.pid.validate(); });
    section("lockin", [&] { c.lock_in.validate(); });
    section("lockon", [&] { c.lock_on.validate(); });
    section("calibrate", [&] { c.grid.validate(); });
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto &b : bad) msg += "\n  " + b;
        throw ConfigError(msg);
    }
}

/// Applies `key = value` lines on top of `base`. Blank lines and text after
/// '#' are ignored. Unknown, duplicate or unparsable keys are reported together.
[[nodiscard]] inline ExperimentConfig parse(std::istream &is, ExperimentConfig base = {},
                                            const std::string &source = "config") {
    auto table = bindings(base);
    std::map<std::string, Binding *, std::less<>> by_key;
    for (auto &b : table) by_key[b.key] = &b;
    std::map<std::string, int, std::less<>> seen;
    std::vector<std::string> bad;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = detail::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            bad.push_back(where + ": expected key = value");
            continue;
        }
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            bad.push_back(key + ": unknown key (" + where + ")");
            continue;
        }
        if (seen[key]++) {
            bad.push_back(key + ": duplicate key (" + where + ")");
            continue;
        }
        if (!it->second->set(value)) bad.push_back(key + ": cannot parse '" + value + "' (" + where + ")");
    }
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto &b : bad) msg += "\n  " + b;
        throw ConfigError(msg);
    }
    return base;
}

[[nodiscard]] inline ExperimentConfig parse_string(const std::string &text, ExperimentConfig base = {}) {
    std::istringstream is(text);
    return parse(is, std::move(base));
}

[[nodiscard]] inline ExperimentConfig load(const std::filesystem::path &path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return parse(is, {}, path.string());
}

/// All keys with their effective values, one `key = value` per line.
[[nodiscard]] inline std::string canonical(const ExperimentConfig &c, bool hashed_only = false) {
    ExperimentConfig copy = c;
    std::string out;
    for (const auto &b : bindings(copy)) {
        if (hashed_only && !b.hashed) continue;
        out += b.key + " = " + b.get() + "\n";
    }
    return out;
}

/// FNV-1a 64 over the canonical form of the hashed keys, as 16 hex digits.
[[nodiscard]] inline std::string config_hash(const ExperimentConfig &c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical(c, true)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// Output locations
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::filesystem::path output_root(const ExperimentConfig &c) {
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char *env = std::getenv("VIVRL_OUT"); env && *env) return env;
    return "vivrl_out";
}

/// <root>/<subcommand>_<stem>_<hash>_s<seed>.<ext>
[[nodiscard]] inline std::filesystem::path artifact_path(const ExperimentConfig &c, const std::string &subcommand,
                                                         const std::string &stem, const std::string &ext) {
    return output_root(c) /
           (subcommand + "_" + stem + "_" + config_hash(c) + "_s" + std::to_string(c.seed) + "." + ext);
}

[[nodiscard]] inline std::filesystem::path calibration_path(const ExperimentConfig &c) {
    if (!c.calibration_file.empty()) return c.calibration_file;
    return output_root(c) / "calibrated_wake.params";
}

// ---------------------------------------------------------------------------
// Calibration overlay
// ---------------------------------------------------------------------------

inline void write_calibration(std::ostream &os, const plant::WakeModelParams &w, const std::string &config_hash,
                              std::uint64_t seed) {
    os << "# subcommand = calibrate\n# config_hash = " << config_hash << "\n# seed = " << seed << '\n';
    os << "wake.vdp_epsilon = " << detail::fmt(w.vdp_epsilon) << '\n'
       << "wake.coupling_A = " << detail::fmt(w.coupling_A) << '\n'
       << "wake.base_lift_coeff = " << detail::fmt(w.base_lift_coeff) << '\n'
       << "wake.fluid_damping_coeff = " << detail::fmt(w.fluid_damping_coeff) << '\n'
       << "wake.rotation_coupling = " << detail::fmt(w.rotation_coupling) << '\n';
}

/// Overlays calibrated wake parameters. Only wake.* keys are accepted.
[[nodiscard]] inline ExperimentConfig apply_calibration(const ExperimentConfig &c, std::istream &is,
                                                        const std::string &source = "calibration") {
    std::string line, filtered;
    while (std::getline(is, line)) {
        const std::string body = detail::trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty()) continue;
        if (body.rfind("wake.", 0) != 0)
            throw ConfigError(source + ": calibration files may only set wake.* keys (got '" + body + "')");
        filtered += body + "\n";
    }
    std::istringstream fs(filtered);
    return parse(fs, c, source);
}

/// Loads the calibration file for flow experiments; a missing file is an
/// error that tells the user to run the calibrate subcommand first.
[[nodiscard]] inline ExperimentConfig with_calibration(const ExperimentConfig &c) {
    const auto path = calibration_path(c);
    std::ifstream is(path);
    if (!is)
        throw CalibrationError("no calibrated wake parameters at " + path.string() +
                               "; run `vivrl calibrate --config <file>` first");
    ExperimentConfig out = apply_calibration(c, is, path.string());
    validate(out);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: actor record, critic record, metadata trailer
// ---------------------------------------------------------------------------

inline constexpr char kMetaMagic[] = "VIVRLM";

struct CheckpointMeta {
    std::uint32_t obs_dim = 0;
    std::uint32_t n_past_actions = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::int32_t episodes = 0;  ///< episodes trained when the checkpoint was taken
};

inline void write_checkpoint(std::ostream &os, const ppo::ActorCritic &ac, const CheckpointMeta &meta) {
    rl::write_record(os, ac.actor, ac.head.log_std);
    rl::write_record(os, ac.critic, {});
    os.write(kMetaMagic, 6);
    rl::io::put_u32(os, meta.obs_dim);
    rl::io::put_u32(os, meta.n_past_actions);
    rl::io::put_u32(os, static_cast<std::uint32_t>(meta.seed & 0xFFFFFFFFu));
    rl::io::put_u32(os, static_cast<std::uint32_t>(meta.seed >> 32));
    rl::io::put_u32(os, static_cast<std::uint32_t>(meta.episodes));
    rl::io::put_u32(os, static_cast<std::uint32_t>(meta.config_hash.size()));
    os.write(meta.config_hash.data(), static_cast<std::streamsize>(meta.config_hash.size()));
}

struct Checkpoint {
    ppo::ActorCritic policy;
    CheckpointMeta meta;
};

[[nodiscard]] inline Checkpoint read_checkpoint(std::istream &is) {
    Checkpoint ck;
    std::vector<double> log_std, unused;
    ck.policy.actor = rl::read_record(is, log_std);
    ck.policy.head.log_std = log_std;
    ck.policy.critic = rl::read_record(is, unused);
    if (ck.policy.actor.input_dim() != ck.policy.critic.input_dim() || ck.policy.actor.output_dim() != 1 ||
        ck.policy.critic.output_dim() != 1 || log_std.size() != 1)
        throw ConfigError("checkpoint: actor and critic shapes do not form an actor-critic");
    char magic[6];
    if (!is.read(magic, 6) || std::memcmp(magic, kMetaMagic, 6) != 0)
        throw ConfigError("checkpoint: missing metadata trailer");
    ck.meta.obs_dim = rl::io::get_u32(is);
    ck.meta.n_past_actions = rl::io::get_u32(is);
    const std::uint64_t lo = rl::io::get_u32(is);
    const std::uint64_t hi = rl::io::get_u32(is);
    ck.meta.seed = lo | (hi << 32);
    ck.meta.episodes = static_cast<std::int32_t>(rl::io::get_u32(is));
    const std::uint32_t n = rl::io::get_u32(is);
    if (n > 256) throw ConfigError("checkpoint: implausible config hash length");
    ck.meta.config_hash.resize(n);
    if (n && !is.read(ck.meta.config_hash.data(), n)) throw ConfigError("checkpoint: truncated");
    if (ck.meta.obs_dim != ck.policy.obs_dim())
        throw ConfigError("checkpoint: metadata observation dimension disagrees with the networks");
    return ck;
}

inline void save_checkpoint(const std::filesystem::path &path, const ppo::ActorCritic &ac, const CheckpointMeta &meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint " + path.string());
    write_checkpoint(os, ac, meta);
}

[[nodiscard]] inline Checkpoint load_checkpoint(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("checkpoint not found: " + path.string());
    return read_checkpoint(is);
}

}  // namespace vivrl::config
