// DC-motor surrogate: PWM duty -> rotation speed through a first-order lag,
// with commands zero-order held on a fixed command grid.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "vivrl/error.hpp"
#include "vivrl/plant.hpp"

namespace vivrl::actuator {

struct MotorParams {
    double omega_max_rad_per_s = 23.52;  ///< speed at |duty| = duty_limit
    double lag_tau_s = 0.2 / 3.0;        ///< 95 % rise in 200 ms
    double duty_limit = 0.4;
    double command_interval_s = 0.1;
    double deadband = 0.0;               ///< |duty| below this produces no rotation

    void validate() const {
        detail::require(omega_max_rad_per_s > 0 && std::isfinite(omega_max_rad_per_s),
                        "motor: omega_max must be positive");
        detail::require(lag_tau_s > 0, "motor: lag_tau_s must be positive");
        detail::require(duty_limit > 0 && duty_limit <= 1, "motor: duty_limit must lie in (0, 1]");
        detail::require(command_interval_s > 0, "motor: command_interval_s must be positive");
        detail::require(deadband >= 0 && deadband < duty_limit, "motor: deadband must lie in [0, duty_limit)");
    }
};

struct MotorState {
    double omega_rad_per_s = 0.0;
    double held_duty = 0.0;
    double time_since_command_s = 0.0;
};

[[nodiscard]] inline double clamp_duty(double duty, const MotorParams &p = {}) {
    if (!std::isfinite(duty)) throw CommandError("clamp_duty: non-finite duty command");
    return std::clamp(duty, -p.duty_limit, p.duty_limit);
}

/// Steady rotation speed for a held duty: linear in duty beyond the deadband.
[[nodiscard]] inline double steady_speed(double duty, const MotorParams &p) {
    const double mag = std::abs(duty);
    if (mag <= p.deadband) return 0.0;
    const double frac = (mag - p.deadband) / (p.duty_limit - p.deadband);
    return std::copysign(p.omega_max_rad_per_s * frac, duty);
}

/// Rotation speed and its rate `h` seconds after state `m`, duty held constant.
[[nodiscard]] inline plant::RotationInput rotation_after(const MotorState &m, double h, const MotorParams &p) {
    const double target = steady_speed(m.held_duty, p);
    const double omega = target + (m.omega_rad_per_s - target) * std::exp(-h / p.lag_tau_s);
    return {omega, (target - omega) / p.lag_tau_s};
}

/// Exact exponential relaxation of Ω toward the held duty's steady speed.
[[nodiscard]] inline MotorState motor_step(const MotorState &m, double dt, const MotorParams &p) {
    detail::require(dt > 0, "motor_step: dt must be positive");
    MotorState out = m;
    out.omega_rad_per_s = rotation_after(m, dt, p).omega;
    out.time_since_command_s += dt;
    return out;
}

/// Latches a new duty command. t_now must lie on the command grid.
[[nodiscard]] inline MotorState hold_command(const MotorState &m, double duty, double t_now, const MotorParams &p) {
    const double ticks = t_now / p.command_interval_s;
    if (std::abs(ticks - std::round(ticks)) > 1e-6)
        throw SchedulingError("hold_command: t = " + std::to_string(t_now) + " s is off the " +
                              std::to_string(p.command_interval_s) + " s command grid");
    MotorState out = m;
    out.held_duty = clamp_duty(duty, p);
    out.time_since_command_s = 0.0;
    return out;
}

/// α = Ω D / (2V).
[[nodiscard]] inline double normalized_speed(double omega, double velocity, double diameter) {
    if (!(velocity > 0)) throw ParameterDomainError("normalized_speed: free-stream velocity must be positive");
    return omega * diameter / (2.0 * velocity);
}

/// Speed at the duty limit that yields normalized rotation `alpha_at_limit` at the given flow.
[[nodiscard]] inline double omega_max_for_alpha(double alpha_at_limit, double velocity, double diameter) {
    return alpha_at_limit * 2.0 * velocity / diameter;
}

}  // namespace vivrl::actuator
