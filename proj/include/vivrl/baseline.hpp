// Open-loop lock-on benchmark: sinusoidal rotation tracked by a PID speed loop,
// swept over forcing-to-natural frequency ratios.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "vivrl/actuator.hpp"
#include "vivrl/analysis.hpp"
#include "vivrl/error.hpp"
#include "vivrl/plant.hpp"
#include "vivrl/record.hpp"

namespace vivrl::baseline {

struct SineCommand {
    double alpha0 = 1.0;
    double fr_hz = 1.96;
    double phase_rad = 0.0;

    void validate() const {
        detail::require(std::isfinite(alpha0) && alpha0 >= 0, "sine: alpha0 must be non-negative");
        detail::require(fr_hz > 0 && std::isfinite(fr_hz), "sine: fr_hz must be positive");
    }
};

/// Gains act on the normalized-speed error α_ref − α_meas and produce duty.
struct SpeedPidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double integral_limit = 1.0;

    void validate() const {
        detail::require(kp >= 0 && ki >= 0 && kd >= 0, "pid: gains must be non-negative");
        detail::require(integral_limit > 0, "pid: integral_limit must be positive");
    }
};

struct PidState {
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;
};

/// Ω_ref = (2V/D) α₀ cos(2π f_r t + φ).
[[nodiscard]] inline double sinusoidal_reference(double t, const SineCommand &cmd, double velocity, double diameter) {
    if (!(velocity > 0)) throw ParameterDomainError("sinusoidal_reference: free-stream velocity must be positive");
    return 2.0 * velocity / diameter * cmd.alpha0 * std::cos(2.0 * std::numbers::pi * cmd.fr_hz * t + cmd.phase_rad);
}

/// One PID step on normalized speeds; the integral is clamped (anti-windup)
/// and the output clipped to the duty bound.
[[nodiscard]] inline double pid_speed_control(double alpha_meas, double alpha_ref, const SpeedPidGains &g, double dt,
                                              PidState &st, const actuator::MotorParams &motor = {}) {
    detail::require(dt > 0, "pid_speed_control: dt must be positive");
    const double e = alpha_ref - alpha_meas;
    st.integral = std::clamp(st.integral + e * dt, -g.integral_limit, g.integral_limit);
    const double de = st.has_prev ? (e - st.prev_error) / dt : 0.0;
    st.prev_error = e;
    st.has_prev = true;
    return actuator::clamp_duty(g.kp * e + g.ki * st.integral + g.kd * de, motor);
}

/// Gains for a closed-loop bandwidth of `bandwidth_multiple` · f_n on the
/// lagged motor: kp = (2π f_bw τ − 1)/G with G the α per unit duty, ki = kp f_n.
[[nodiscard]] inline SpeedPidGains tune_gains(const actuator::MotorParams &motor, double velocity, double diameter,
                                              double fn_hz, double bandwidth_multiple) {
    detail::require(bandwidth_multiple > 0, "tune_gains: bandwidth multiple must be positive");
    const double alpha_at_limit = actuator::normalized_speed(motor.omega_max_rad_per_s, velocity, diameter);
    const double gain = alpha_at_limit / motor.duty_limit;
    const double wbw = 2.0 * std::numbers::pi * bandwidth_multiple * fn_hz;
    SpeedPidGains g;
    g.kp = std::max(0.0, (wbw * motor.lag_tau_s - 1.0) / gain);
    g.ki = g.kp * fn_hz;
    g.kd = 0.0;
    g.integral_limit = 1.0;
    return g;
}

struct LockOnSetup {
    plant::PlantParams plant;      ///< flow set at the sweep's reduced velocity
    actuator::MotorParams motor;   ///< command_interval_s is the PID update period
    SpeedPidGains gains;
    double alpha0 = 1.0;           ///< a negative value flips the reference (phase π)
    double duration_s = 0.0;       ///< 0 → same settling rule as the lock-in sweep

    void validate() const {
        plant.validate();
        motor.validate();
        gains.validate();
        detail::require(plant.flow.velocity_m_per_s > 0, "lock-on: flow velocity must be positive");
        detail::require(std::abs(std::round(motor.command_interval_s / plant::kPhysicsDt) * plant::kPhysicsDt -
                                 motor.command_interval_s) < 1e-12,
                        "lock-on: PID period must be a whole number of physics steps");
    }
};

/// How the speed loop is run: update period and closed-loop bandwidth.
struct PidTuning {
    double interval_s = 1e-3;
    double bandwidth_multiple = 20.0;  ///< closed-loop bandwidth in units of f_n

    void validate() const {
        detail::require(interval_s > 0 && interval_s <= 0.1, "pid: interval_s must lie in (0, 0.1]");
        detail::require(bandwidth_multiple > 0, "pid: bandwidth_multiple must be positive");
    }
};

/// Sweep setup for a plant whose flow is already set; the motor keeps its
/// physical limits and is commanded at the PID period.
[[nodiscard]] inline LockOnSetup make_lock_on_setup(const plant::PlantParams &p, actuator::MotorParams motor,
                                                    const PidTuning &tuning, double alpha0 = 1.0) {
    tuning.validate();
    motor.command_interval_s = tuning.interval_s;
    LockOnSetup s;
    s.plant = p;
    s.motor = motor;
    s.gains = tune_gains(motor, p.flow.velocity_m_per_s, p.cylinder.diameter_m, plant::nominal_natural_frequency(p),
                         tuning.bandwidth_multiple);
    s.alpha0 = alpha0;
    s.validate();
    return s;
}

struct LockOnPoint {
    double ratio = 0.0;
    double a_over_d = 0.0;
    double tracking_rms = 0.0;  ///< RMS of α_ref − α over the steady window
};

struct LockOnRun {
    RunRecord record;   ///< sampled every 10 ms
    LockOnPoint point;
};

/// Forced response at one frequency ratio, from Y = 0.01 D with the motor at rest.
[[nodiscard]] inline LockOnRun lock_on_run(double ratio, const LockOnSetup &setup) {
    detail::require(ratio >= 0.2 && ratio <= 3.0, "frequency_sweep: ratio must lie in [0.2, 3.0]");
    setup.validate();
    const plant::PlantParams &p = setup.plant;
    const actuator::MotorParams &mp = setup.motor;
    const double d = p.cylinder.diameter_m;
    const double v = p.flow.velocity_m_per_s;
    const double fn = plant::nominal_natural_frequency(p);
    const SineCommand cmd{std::abs(setup.alpha0), ratio * fn, setup.alpha0 < 0 ? std::numbers::pi : 0.0};
    cmd.validate();
    const double duration = setup.duration_s > 0 ? setup.duration_s : plant::default_uncontrolled_duration(p);
    const double dt = plant::kPhysicsDt;
    const auto sub = static_cast<long>(std::lround(mp.command_interval_s / dt));
    const auto updates = static_cast<long>(std::floor(duration / mp.command_interval_s + 1e-9));
    const auto record_every = std::max<long>(1, static_cast<long>(std::lround(0.01 / mp.command_interval_s)));
    const double steady_from = duration * (1.0 - plant::kSteadyWindowFraction);

    LockOnRun run;
    run.record.sample_interval_s = static_cast<double>(record_every) * mp.command_interval_s;
    plant::PlantState s;
    s.y_m = 0.01 * d;
    actuator::MotorState m;
    PidState pid;
    double err_sq = 0.0;
    long err_n = 0;
    for (long i = 0; i < updates; ++i) {
        const double t = static_cast<double>(i) * mp.command_interval_s;
        const double a_ref = sinusoidal_reference(t, cmd, v, d) * d / (2.0 * v);
        const double a_meas = actuator::normalized_speed(m.omega_rad_per_s, v, d);
        if (t >= steady_from) {
            err_sq += (a_ref - a_meas) * (a_ref - a_meas);
            ++err_n;
        }
        const double duty = pid_speed_control(a_meas, a_ref, setup.gains, mp.command_interval_s, pid, mp);
        m = actuator::hold_command(m, duty, static_cast<double>(i) * mp.command_interval_s, mp);
        for (long k = 0; k < sub; ++k) {
            const actuator::MotorState m0 = m;
            const double t0 = s.time_s;
            s = plant::rk4_step(s, [&](double tt) { return actuator::rotation_after(m0, tt - t0, mp); }, dt, p);
            m = actuator::motor_step(m, dt, mp);
        }
        s.time_s = static_cast<double>(i + 1) * mp.command_interval_s;
        if ((i + 1) % record_every == 0) {
            const double yd = s.y_m / d;
            run.record.samples.push_back({s.time_s, yd, s.ydot_m_per_s / (fn * d), duty,
                                          actuator::normalized_speed(m.omega_rad_per_s, v, d), -std::abs(yd)});
        }
    }
    run.point.ratio = ratio;
    run.point.a_over_d = analysis::steady_amplitude(run.record, plant::kSteadyWindowFraction);
    run.point.tracking_rms = err_n > 0 ? std::sqrt(err_sq / static_cast<double>(err_n)) : 0.0;
    return run;
}

[[nodiscard]] inline std::vector<LockOnPoint> frequency_sweep(std::span<const double> ratios, const LockOnSetup &setup) {
    std::vector<LockOnPoint> out;
    out.reserve(ratios.size());
    for (double r : ratios) out.push_back(lock_on_run(r, setup).point);
    return out;
}

inline constexpr const char *kSweepCsvHeader = "ratio,a_over_d,tracking_rms";

inline void write_sweep_csv(std::ostream &os, std::span<const LockOnPoint> pts) {
    os << kSweepCsvHeader << '\n';
    os.precision(10);
    for (const auto &p : pts) os << p.ratio << ',' << p.a_over_d << ',' << p.tracking_rms << '\n';
}

}  // namespace vivrl::baseline
