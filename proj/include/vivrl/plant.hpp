// Reduced-order vortex-induced-vibration plant.
//
// An elastically mounted cylinder (1 DOF, transverse) coupled to a van der Pol
// wake oscillator. Rotary actuation enters the wake equation as a forcing term
// proportional to the rate of change of the normalized rotation speed, which is
// enough to reproduce lock-on entrainment and high-frequency quenching.
//
//   (M + C_a M_d) Ÿ + (C + c_f) Ẏ + K Y = ¼ ρ V² D L C_L0 q
//   q̈ + ε ω_s (q² − 1) q̇ + ω_s² q    = (A/D) Ÿ + κ_r ω_s α̇
//
// with ω_s = 2π St V / D, c_f = γ_f ρ D² ω_s L and α = Ω D / (2V).
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vivrl/analysis.hpp"
#include "vivrl/error.hpp"
#include "vivrl/record.hpp"

namespace vivrl::plant {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct CylinderProperties {
    double diameter_m = 0.0175;
    double immersed_length_m = 0.160;
    double oscillating_mass_kg = 1.095;
    double displaced_mass_kg = 0.36007;
    double stiffness_N_per_m = 0.0;
    double structural_damping_Ns_per_m = 0.0;

    [[nodiscard]] double mass_ratio() const { return oscillating_mass_kg / displaced_mass_kg; }

    void validate() const {
        detail::require(diameter_m > 0 && immersed_length_m > 0 && oscillating_mass_kg > 0 &&
                            displaced_mass_kg > 0 && stiffness_N_per_m > 0 &&
                            structural_damping_Ns_per_m > 0,
                        "cylinder: all properties must be strictly positive");
        const double aspect = immersed_length_m / diameter_m;
        detail::require(aspect >= 5.0 && aspect <= 20.0, "cylinder: L/D must lie in [5, 20]");
        detail::require(mass_ratio() > 1.0, "cylinder: mass ratio M/M_d must exceed 1");
    }
};

struct FlowConditions {
    double velocity_m_per_s = 0.2;
    double density_kg_per_m3 = 1000.0;
    double strouhal = 0.21;

    void validate() const {
        detail::require(velocity_m_per_s >= 0.01 && velocity_m_per_s <= 1.0,
                        "flow: velocity must lie in [0.01, 1.0] m/s");
        detail::require(density_kg_per_m3 > 0, "flow: density must be positive");
        detail::require(strouhal >= 0.1 && strouhal <= 0.3, "flow: Strouhal number must lie in [0.1, 0.3]");
    }
};

struct WakeModelParams {
    double vdp_epsilon = 0.3;
    double coupling_A = 12.0;
    double base_lift_coeff = 0.6;
    double rotation_coupling = 0.0;
    double added_mass_coeff = 1.0;
    double fluid_damping_coeff = 0.8;
    double magnus_coeff = 0.0;       ///< rotation lift per unit lagged α
    double magnus_lag_convective = 20.0;  ///< circulation build-up time in units of D/V (0: quasi-steady)

    void validate() const {
        const bool finite = std::isfinite(vdp_epsilon) && std::isfinite(coupling_A) &&
                            std::isfinite(base_lift_coeff) && std::isfinite(rotation_coupling) &&
                            std::isfinite(added_mass_coeff) && std::isfinite(fluid_damping_coeff) &&
                            std::isfinite(magnus_coeff) && std::isfinite(magnus_lag_convective);
        detail::require(finite, "wake: parameters must be finite");
        detail::require(vdp_epsilon > 0, "wake: vdp_epsilon must be positive");
        detail::require(coupling_A > 0, "wake: coupling_A must be positive");
        detail::require(base_lift_coeff > 0, "wake: base_lift_coeff must be positive");
        detail::require(rotation_coupling >= 0, "wake: rotation_coupling must be non-negative");
        detail::require(added_mass_coeff >= 0 && fluid_damping_coeff >= 0 && magnus_coeff >= 0 &&
                            magnus_lag_convective >= 0,
                        "wake: added mass, fluid damping and Magnus coefficients must be non-negative");
    }
};

enum class Medium { water, air };

/// Which mass the nominal natural frequency f_n refers to.
/// in_water: f_n = √(K/(M + C_a M_d))/2π; in_air: f_n = √(K/M)/2π.
enum class StiffnessBasis { in_water, in_air };

struct PlantParams {
    CylinderProperties cylinder;
    FlowConditions flow;
    WakeModelParams wake;
    Medium medium = Medium::water;
    StiffnessBasis basis = StiffnessBasis::in_water;

    void validate() const {
        cylinder.validate();
        wake.validate();
        if (medium == Medium::water && flow.velocity_m_per_s > 0) flow.validate();
    }
};

struct PlantState {
    double y_m = 0.0;
    double ydot_m_per_s = 0.0;
    double wake_q = 0.0;
    double wake_qdot = 0.0;
    double time_s = 0.0;
    double alpha_lift = 0.0;  ///< α lagged by the circulation build-up; drives the rotation lift

    [[nodiscard]] PlantState negated() const {
        return {-y_m, -ydot_m_per_s, -wake_q, -wake_qdot, time_s, -alpha_lift};
    }
};

/// Time derivative of (Y, Ẏ, q, q̇).
struct PlantDerivative {
    double dy = 0.0;
    double dydot = 0.0;
    double dq = 0.0;
    double dqdot = 0.0;
    double dalpha_lift = 0.0;
};

/// Rotation speed of the cylinder and its time derivative at one instant.
struct RotationInput {
    double omega = 0.0;
    double omega_dot = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar relations
// ---------------------------------------------------------------------------

[[nodiscard]] inline double natural_frequency(double stiffness, double mass) {
    detail::require(stiffness > 0 && mass > 0, "natural_frequency: K and M must be positive");
    return std::sqrt(stiffness / mass) / kTwoPi;
}

[[nodiscard]] inline double damping_ratio(double damping, double stiffness, double mass) {
    detail::require(damping >= 0 && stiffness > 0 && mass > 0,
                    "damping_ratio: C must be non-negative, K and M positive");
    return damping / (2.0 * std::sqrt(stiffness * mass));
}

[[nodiscard]] inline double reduced_velocity(double velocity, double fn_hz, double diameter) {
    detail::require(fn_hz > 0 && diameter > 0, "reduced_velocity: f_n and D must be positive");
    return velocity / (fn_hz * diameter);
}

/// Skop–Griffin mass-damping parameter 2π³ St² (1 + m) ζ.
[[nodiscard]] inline double skop_griffin(double strouhal, double mass_ratio, double zeta) {
    detail::require(strouhal > 0 && mass_ratio >= 0 && zeta >= 0,
                    "skop_griffin: St must be positive, m and zeta non-negative");
    constexpr double pi3 = std::numbers::pi * std::numbers::pi * std::numbers::pi;
    return 2.0 * pi3 * strouhal * strouhal * (1.0 + mass_ratio) * zeta;
}

// ---------------------------------------------------------------------------
// Derived plant quantities
// ---------------------------------------------------------------------------

[[nodiscard]] inline bool added_mass_active(const PlantParams &p) { return p.medium == Medium::water; }

[[nodiscard]] inline double effective_mass(const PlantParams &p) {
    const double added = added_mass_active(p) ? p.wake.added_mass_coeff * p.cylinder.displaced_mass_kg : 0.0;
    return p.cylinder.oscillating_mass_kg + added;
}

/// Nominal natural frequency used to normalize U, Ẏ and frequency ratios.
[[nodiscard]] inline double nominal_natural_frequency(const PlantParams &p) {
    const double mass = p.basis == StiffnessBasis::in_water
                            ? p.cylinder.oscillating_mass_kg + p.wake.added_mass_coeff * p.cylinder.displaced_mass_kg
                            : p.cylinder.oscillating_mass_kg;
    return natural_frequency(p.cylinder.stiffness_N_per_m, mass);
}

/// Strouhal shedding circular frequency ω_s (zero when there is no flow).
[[nodiscard]] inline double shedding_omega(const PlantParams &p) {
    if (p.medium == Medium::air) return 0.0;
    return kTwoPi * p.flow.strouhal * p.flow.velocity_m_per_s / p.cylinder.diameter_m;
}

[[nodiscard]] inline double fluid_damping(const PlantParams &p) {
    if (p.medium == Medium::air) return 0.0;
    const double d = p.cylinder.diameter_m;
    return p.wake.fluid_damping_coeff * p.flow.density_kg_per_m3 * d * d * shedding_omega(p) *
           p.cylinder.immersed_length_m;
}

[[nodiscard]] inline double lift_per_unit_q(const PlantParams &p) {
    if (p.medium == Medium::air) return 0.0;
    const double v = p.flow.velocity_m_per_s;
    return 0.25 * p.flow.density_kg_per_m3 * v * v * p.cylinder.diameter_m * p.cylinder.immersed_length_m *
           p.wake.base_lift_coeff;
}

/// Normalized rotation α = ΩD/(2V); zero without flow.
[[nodiscard]] inline double rotation_alpha(const PlantParams &p, double omega) {
    if (p.medium == Medium::air || p.flow.velocity_m_per_s <= 0) return 0.0;
    return omega * p.cylinder.diameter_m / (2.0 * p.flow.velocity_m_per_s);
}

/// Rotation lift ½ρV²DL · magnus_coeff · α_lift.
[[nodiscard]] inline double magnus_force(const PlantParams &p, double alpha_lift) {
    if (p.medium == Medium::air || p.wake.magnus_coeff == 0.0) return 0.0;
    const double v = p.flow.velocity_m_per_s;
    return 0.5 * p.flow.density_kg_per_m3 * v * v * p.cylinder.diameter_m * p.cylinder.immersed_length_m *
           p.wake.magnus_coeff * alpha_lift;
}

/// Rate of the normalized rotation speed, α̇ = Ω̇ D / (2V); zero without flow.
[[nodiscard]] inline double alpha_rate(const PlantParams &p, double omega_dot) {
    if (p.medium == Medium::air || p.flow.velocity_m_per_s <= 0) return 0.0;
    return omega_dot * p.cylinder.diameter_m / (2.0 * p.flow.velocity_m_per_s);
}

/// Stiffness that places the nominal natural frequency at fn_hz under the given basis.
[[nodiscard]] inline double stiffness_for_frequency(double fn_hz, const CylinderProperties &cyl,
                                                    const WakeModelParams &wake, StiffnessBasis basis) {
    const double mass = basis == StiffnessBasis::in_water
                            ? cyl.oscillating_mass_kg + wake.added_mass_coeff * cyl.displaced_mass_kg
                            : cyl.oscillating_mass_kg;
    const double w = kTwoPi * fn_hz;
    return w * w * mass;
}

/// Rig defaults: D = 17.5 mm, L = 160 mm, M = 1095 g, M_d = 360.07 g,
/// f_n = 1.96 Hz, ζ_air = 1.02e-2, flow at U = 6.
[[nodiscard]] inline PlantParams default_params(StiffnessBasis basis = StiffnessBasis::in_water) {
    PlantParams p;
    p.basis = basis;
    p.cylinder.stiffness_N_per_m = stiffness_for_frequency(1.96, p.cylinder, p.wake, basis);
    p.cylinder.structural_damping_Ns_per_m =
        2.0 * 1.02e-2 * std::sqrt(p.cylinder.stiffness_N_per_m * p.cylinder.oscillating_mass_kg);
    p.flow.velocity_m_per_s = 6.0 * 1.96 * p.cylinder.diameter_m;
    return p;
}

/// Returns params with the free stream set to reduced velocity U.
[[nodiscard]] inline PlantParams at_reduced_velocity(PlantParams p, double U) {
    p.flow.velocity_m_per_s = U * nominal_natural_frequency(p) * p.cylinder.diameter_m;
    return p;
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

inline void check_finite(const PlantState &s) {
    if (!(std::isfinite(s.y_m) && std::isfinite(s.ydot_m_per_s) && std::isfinite(s.wake_q) &&
          std::isfinite(s.wake_qdot) && std::isfinite(s.alpha_lift)))
        throw DivergenceError("plant state is not finite at t = " + std::to_string(s.time_s));
    if (std::abs(s.wake_q) >= 10.0)
        throw DivergenceError("wake variable |q| >= 10 at t = " + std::to_string(s.time_s));
}

[[nodiscard]] inline PlantDerivative plant_derivatives(const PlantState &s, RotationInput rot, const PlantParams &p) {
    check_finite(s);
    const double ws = shedding_omega(p);
    const bool lagged_lift = p.wake.magnus_coeff != 0.0 && p.wake.magnus_lag_convective > 0.0;
    const double alpha_now = rotation_alpha(p, rot.omega);
    const double force =
        lift_per_unit_q(p) * s.wake_q + magnus_force(p, lagged_lift ? s.alpha_lift : alpha_now);
    const double damping = p.cylinder.structural_damping_Ns_per_m + fluid_damping(p);
    const double yddot =
        (force - damping * s.ydot_m_per_s - p.cylinder.stiffness_N_per_m * s.y_m) / effective_mass(p);

    // Without flow (air, or still water) there is no shedding; keep q frozen.
    double qddot = 0.0;
    if (p.medium == Medium::water && p.flow.velocity_m_per_s > 0) {
        const double q = s.wake_q;
        qddot = (p.wake.coupling_A / p.cylinder.diameter_m) * yddot +
                p.wake.rotation_coupling * ws * alpha_rate(p, rot.omega_dot) -
                p.wake.vdp_epsilon * ws * (q * q - 1.0) * s.wake_qdot - ws * ws * q;
    }
    double dalpha_lift = 0.0;
    if (lagged_lift && p.flow.velocity_m_per_s > 0) {
        const double tau = p.wake.magnus_lag_convective * p.cylinder.diameter_m / p.flow.velocity_m_per_s;
        dalpha_lift = (alpha_now - s.alpha_lift) / tau;
    }
    return {s.ydot_m_per_s, yddot, s.wake_qdot, qddot, dalpha_lift};
}

namespace impl {
inline PlantState advance(const PlantState &s, const PlantDerivative &d, double h) {
    return {s.y_m + h * d.dy,         s.ydot_m_per_s + h * d.dydot, s.wake_q + h * d.dq,
            s.wake_qdot + h * d.dqdot, s.time_s + h,                 s.alpha_lift + h * d.dalpha_lift};
}
}  // namespace impl

/// Classical RK4 advance by dt. `rotation_at(t)` returns the RotationInput at time t.
template <class RotationFn>
[[nodiscard]] PlantState rk4_step(const PlantState &s, RotationFn &&rotation_at, double dt, const PlantParams &p) {
    if (!(dt > 0.0 && dt <= 5e-3 + 1e-15)) throw ParameterDomainError("rk4_step: dt must lie in (0, 5 ms]");
    const double t = s.time_s;
    const double h2 = 0.5 * dt;
    const PlantDerivative k1 = plant_derivatives(s, rotation_at(t), p);
    const PlantDerivative k2 = plant_derivatives(impl::advance(s, k1, h2), rotation_at(t + h2), p);
    const PlantDerivative k3 = plant_derivatives(impl::advance(s, k2, h2), rotation_at(t + h2), p);
    const PlantDerivative k4 = plant_derivatives(impl::advance(s, k3, dt), rotation_at(t + dt), p);
    PlantState out;
    out.y_m = s.y_m + dt / 6.0 * (k1.dy + 2 * k2.dy + 2 * k3.dy + k4.dy);
    out.ydot_m_per_s = s.ydot_m_per_s + dt / 6.0 * (k1.dydot + 2 * k2.dydot + 2 * k3.dydot + k4.dydot);
    out.wake_q = s.wake_q + dt / 6.0 * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq);
    out.wake_qdot = s.wake_qdot + dt / 6.0 * (k1.dqdot + 2 * k2.dqdot + 2 * k3.dqdot + k4.dqdot);
    out.alpha_lift =
        s.alpha_lift + dt / 6.0 * (k1.dalpha_lift + 2 * k2.dalpha_lift + 2 * k3.dalpha_lift + k4.dalpha_lift);
    out.time_s = t + dt;
    check_finite(out);
    return out;
}

[[nodiscard]] inline PlantState rk4_step(const PlantState &s, double dt, const PlantParams &p) {
    return rk4_step(s, [](double) { return RotationInput{}; }, dt, p);
}

/// Mechanical energy ½MẎ² + ½KY² (oscillating mass only).
[[nodiscard]] inline double mechanical_energy(const PlantState &s, const PlantParams &p) {
    return 0.5 * p.cylinder.oscillating_mass_kg * s.ydot_m_per_s * s.ydot_m_per_s +
           0.5 * p.cylinder.stiffness_N_per_m * s.y_m * s.y_m;
}

// ---------------------------------------------------------------------------
// Uncontrolled experiments
// ---------------------------------------------------------------------------

inline constexpr double kPhysicsDt = 1e-3;
inline constexpr double kSteadyWindowFraction = 0.4;
inline constexpr double kMinSettlePeriods = 20.0;

/// Simulation length that leaves ≥ 20 T₀ of settling before the steady window.
[[nodiscard]] inline double default_uncontrolled_duration(const PlantParams &p) {
    const double t0 = 1.0 / nominal_natural_frequency(p);
    return std::max(60.0, kMinSettlePeriods * t0 / (1.0 - kSteadyWindowFraction));
}

/// Free VIV response at reduced velocity U from Y = y0_over_d·D, Ω ≡ 0.
[[nodiscard]] inline RunRecord simulate_uncontrolled(double U, double duration_s, const PlantParams &base,
                                                     double y0_over_d = 0.01, double sample_interval_s = 0.01) {
    detail::require(U >= 2.0 && U <= 12.0, "simulate_uncontrolled: U must lie in [2, 12]");
    detail::require(duration_s > 0 && sample_interval_s >= kPhysicsDt, "simulate_uncontrolled: bad duration");
    PlantParams p = at_reduced_velocity(base, U);
    p.medium = Medium::water;
    p.validate();
    const double d = p.cylinder.diameter_m;
    const double fn = nominal_natural_frequency(p);
    const auto substeps = static_cast<long>(std::lround(sample_interval_s / kPhysicsDt));
    const auto samples = static_cast<long>(std::floor(duration_s / sample_interval_s + 1e-9));

    RunRecord rec{sample_interval_s, {}};
    rec.samples.reserve(static_cast<std::size_t>(samples) + 1);
    PlantState s;
    s.y_m = y0_over_d * d;
    auto record = [&](const PlantState &st) {
        const double yd = st.y_m / d;
        rec.samples.push_back({st.time_s, yd, st.ydot_m_per_s / (fn * d), 0.0, 0.0, -std::abs(yd)});
    };
    record(s);
    for (long i = 0; i < samples; ++i) {
        for (long k = 0; k < substeps; ++k) s = rk4_step(s, kPhysicsDt, p);
        s.time_s = static_cast<double>(i + 1) * sample_interval_s;
        record(s);
    }
    return rec;
}

struct SweepPoint {
    double x = 0.0;         ///< U for lock-in sweeps, f_r/f_n for lock-on sweeps
    double a_over_d = 0.0;
};

/// Steady A/D over the trailing window of an uncontrolled run at each U.
[[nodiscard]] inline std::vector<SweepPoint> amplitude_sweep(std::span<const double> u_values, const PlantParams &p,
                                                             double duration_s = 0.0) {
    std::vector<SweepPoint> out;
    out.reserve(u_values.size());
    const double dur = duration_s > 0 ? duration_s : default_uncontrolled_duration(p);
    for (double U : u_values) {
        const RunRecord rec = simulate_uncontrolled(U, dur, p);
        out.push_back({U, analysis::steady_amplitude(rec, kSteadyWindowFraction)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Free-decay identification
// ---------------------------------------------------------------------------

struct DecayResult {
    double frequency_hz = 0.0;
    double zeta = 0.0;
    int peaks_used = 0;
};

/// Identifies (f, ζ) from a sampled decaying oscillation: frequency from the
/// mean interpolated zero-crossing interval, ζ from the logarithmic decrement.
[[nodiscard]] inline DecayResult identify_decay(std::span<const double> y, double dt) {
    std::vector<double> crossings;
    std::vector<double> peaks;
    for (std::size_t i = 1; i < y.size(); ++i) {
        if ((y[i - 1] < 0.0 && y[i] >= 0.0) || (y[i - 1] > 0.0 && y[i] <= 0.0)) {
            const double frac = y[i - 1] / (y[i - 1] - y[i]);
            crossings.push_back((static_cast<double>(i - 1) + frac) * dt);
        }
        if (i + 1 < y.size() && y[i] > 0.0 && y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            // Parabolic refinement of the maximum.
            const double a = y[i - 1], b = y[i], c = y[i + 1];
            const double denom = a - 2 * b + c;
            const double offset = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
            peaks.push_back(b - 0.25 * (a - c) * offset);
        }
    }
    if (peaks.size() < 5 || crossings.size() < 3)
        throw IdentificationError("free decay: fewer than 5 detectable peaks");
    const double half_period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
    const auto cycles = static_cast<double>(peaks.size() - 1);
    const double delta = std::log(peaks.front() / peaks.back()) / cycles;
    DecayResult r;
    r.frequency_hz = 1.0 / (2.0 * half_period);
    r.zeta = delta / std::sqrt(4.0 * std::numbers::pi * std::numbers::pi + delta * delta);
    r.peaks_used = static_cast<int>(peaks.size());
    return r;
}

/// Free-decay test in air or still water from an initial displacement y0 (m).
[[nodiscard]] inline DecayResult free_decay(Medium medium, double y0_m, const PlantParams &base,
                                            double duration_s = 0.0) {
    detail::require(y0_m > 0 && y0_m <= base.cylinder.diameter_m, "free_decay: Y0 must lie in (0, D]");
    base.cylinder.validate();
    PlantParams p = base;
    p.medium = medium;
    p.flow.velocity_m_per_s = 0.0;
    const double fn_guess = natural_frequency(p.cylinder.stiffness_N_per_m, effective_mass(p));
    // ~25 cycles, or until the amplitude has decayed well below Y0.
    const double dur = duration_s > 0 ? duration_s : 25.0 / fn_guess;
    const auto steps = static_cast<std::size_t>(std::lround(dur / kPhysicsDt));
    std::vector<double> y;
    y.reserve(steps + 1);
    PlantState s;
    s.y_m = y0_m;
    y.push_back(s.y_m);
    for (std::size_t i = 0; i < steps; ++i) {
        s = rk4_step(s, kPhysicsDt, p);
        y.push_back(s.y_m);
    }
    // Discard peaks lost in round-off.
    const double floor = 1e-9 * y0_m;
    std::size_t last = y.size();
    for (std::size_t i = 0; i < y.size(); ++i)
        if (std::abs(y[i]) > floor) last = i + 1;
    return identify_decay(std::span<const double>(y.data(), last), kPhysicsDt);
}

}  // namespace vivrl::plant
