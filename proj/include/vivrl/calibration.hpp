// Grid calibration of the wake surrogate against the lock-in curve and the
// lock-on sweep shape.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vivrl/actuator.hpp"
#include "vivrl/baseline.hpp"
#include "vivrl/error.hpp"
#include "vivrl/parallel.hpp"
#include "vivrl/plant.hpp"

namespace vivrl::calib {

struct LockInTargets {
    double peak_a_over_d = 0.6;
    double peak_tolerance = 0.05;
    double band_lo_u = 4.5;
    double band_hi_u = 9.0;
    double band_threshold = 0.1;  ///< A/D above which a point belongs to the band
    double cover_lo_u = 5.0;      ///< the band must contain [cover_lo_u, cover_hi_u]
    double cover_hi_u = 8.0;
    std::vector<double> u_grid = {3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 8.5, 9.0, 9.5, 10.0};

    void validate() const {
        detail::require(peak_tolerance > 0 && band_threshold > 0, "calibration: tolerances must be positive");
        detail::require(band_lo_u < band_hi_u && cover_lo_u <= cover_hi_u, "calibration: bad band targets");
        detail::require(u_grid.size() >= 3 && std::is_sorted(u_grid.begin(), u_grid.end()),
                        "calibration: u_grid needs at least 3 ascending values");
    }
};

struct LockOnTargets {
    double reduced_velocity = 7.5;
    double alpha0 = 1.0;
    std::vector<double> ratios = {0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
    double peak_ratio = 1.0;
    double peak_a_over_d = 0.65;
    double peak_tolerance = 0.1;
    double dip_ratio = 0.8;
    double dip_margin = 0.05;     ///< A/D gap the dip must keep below both neighbours
    double high_ratio = 1.6;
    double high_ratio_max = 0.1;

    void validate() const {
        detail::require(reduced_velocity >= 2 && reduced_velocity <= 12, "calibration: lock-on U must lie in [2, 12]");
        auto has = [&](double r) {
            return std::any_of(ratios.begin(), ratios.end(), [&](double x) { return std::abs(x - r) < 1e-9; });
        };
        detail::require(std::is_sorted(ratios.begin(), ratios.end()) && has(peak_ratio) && has(dip_ratio) &&
                            has(high_ratio),
                        "calibration: lock-on ratios must be ascending and contain the peak, dip and high ratios");
        auto it = std::find_if(ratios.begin(), ratios.end(), [&](double x) { return std::abs(x - dip_ratio) < 1e-9; });
        detail::require(it != ratios.begin() && it + 1 != ratios.end(), "calibration: dip ratio needs two neighbours");
    }
};

/// Candidate values per wake parameter; every combination is evaluated.
struct CalibrationGrid {
    std::vector<double> vdp_epsilon = {1.0, 2.0, 3.0};
    std::vector<double> coupling_A = {15.0, 20.0, 25.0};
    std::vector<double> base_lift_coeff = {0.5, 0.6, 0.7};
    std::vector<double> fluid_damping_coeff = {0.4, 0.8};
    std::vector<double> rotation_coupling = {2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0};

    void validate() const {
        detail::require(!vdp_epsilon.empty() && !coupling_A.empty() && !base_lift_coeff.empty() &&
                            !fluid_damping_coeff.empty() && !rotation_coupling.empty(),
                        "calibration: every grid axis needs at least one value");
    }
};

struct LockInScore {
    plant::WakeModelParams wake;
    std::vector<plant::SweepPoint> sweep;
    double peak_a_over_d = 0.0;
    double peak_u = 0.0;
    double band_lo_u = 0.0;  ///< contiguous band around the peak (0 when empty)
    double band_hi_u = 0.0;
    double score = std::numeric_limits<double>::infinity();
    bool within_tolerance = false;
    std::string note;
};

struct LockOnScore {
    double rotation_coupling = 0.0;
    std::vector<baseline::LockOnPoint> sweep;
    double score = std::numeric_limits<double>::infinity();
    bool feasible = false;
    std::string note;
};

struct CalibrationReport {
    bool success = false;
    std::string message;
    plant::WakeModelParams wake;  ///< calibrated (or best-effort) parameters
    LockInScore lock_in;
    LockOnScore lock_on;
    std::vector<LockInScore> lock_in_candidates;
    std::vector<LockOnScore> lock_on_candidates;
};

/// Contiguous range of grid U around the peak whose A/D exceeds `threshold`.
inline void measure_band(LockInScore &s, double threshold) {
    const auto &sw = s.sweep;
    if (sw.empty()) return;
    std::size_t ip = 0;
    for (std::size_t i = 1; i < sw.size(); ++i)
        if (sw[i].a_over_d > sw[ip].a_over_d) ip = i;
    s.peak_a_over_d = sw[ip].a_over_d;
    s.peak_u = sw[ip].x;
    if (s.peak_a_over_d <= threshold) {
        s.band_lo_u = s.band_hi_u = 0.0;
        return;
    }
    std::size_t lo = ip, hi = ip;
    while (lo > 0 && sw[lo - 1].a_over_d > threshold) --lo;
    while (hi + 1 < sw.size() && sw[hi + 1].a_over_d > threshold) ++hi;
    s.band_lo_u = sw[lo].x;
    s.band_hi_u = sw[hi].x;
}

/// Lock-in score: squared peak error in units of the tolerance plus squared band-edge errors in U.
[[nodiscard]] inline LockInScore score_lock_in(const plant::PlantParams &base, const plant::WakeModelParams &wake,
                                               const LockInTargets &t) {
    LockInScore s;
    s.wake = wake;
    plant::PlantParams p = base;
    p.wake = wake;
    try {
        s.sweep = plant::amplitude_sweep(t.u_grid, p);
    } catch (const Error &e) {
        s.note = std::string("sweep failed: ") + e.what();
        return s;
    }
    measure_band(s, t.band_threshold);
    const double ep = (s.peak_a_over_d - t.peak_a_over_d) / t.peak_tolerance;
    const double elo = s.band_lo_u - t.band_lo_u;
    const double ehi = s.band_hi_u - t.band_hi_u;
    s.score = ep * ep + elo * elo + ehi * ehi;
    s.within_tolerance = std::abs(s.peak_a_over_d - t.peak_a_over_d) <= t.peak_tolerance &&
                         s.band_hi_u > s.band_lo_u && s.band_lo_u <= t.cover_lo_u && s.band_hi_u >= t.cover_hi_u;
    return s;
}

[[nodiscard]] inline double sweep_value(const std::vector<baseline::LockOnPoint> &sw, double ratio) {
    for (const auto &p : sw)
        if (std::abs(p.ratio - ratio) < 1e-9) return p.a_over_d;
    throw CalibrationError("calibration: ratio missing from sweep");
}

/// Lock-on score for one κ_r: feasible when the curve peaks at the peak ratio
/// within tolerance, dips at the dip ratio and is small at the high ratio.
[[nodiscard]] inline LockOnScore score_lock_on(const plant::PlantParams &base, const plant::WakeModelParams &wake,
                                               double kappa, const actuator::MotorParams &motor,
                                               const baseline::PidTuning &tuning, const LockOnTargets &t) {
    LockOnScore s;
    s.rotation_coupling = kappa;
    plant::PlantParams p = base;
    p.wake = wake;
    p.wake.rotation_coupling = kappa;
    p = plant::at_reduced_velocity(p, t.reduced_velocity);
    try {
        s.sweep = baseline::frequency_sweep(t.ratios, baseline::make_lock_on_setup(p, motor, tuning, t.alpha0));
    } catch (const Error &e) {
        s.note = std::string("sweep failed: ") + e.what();
        return s;
    }
    const double a_peak = sweep_value(s.sweep, t.peak_ratio);
    const double a_dip = sweep_value(s.sweep, t.dip_ratio);
    const double a_high = sweep_value(s.sweep, t.high_ratio);
    auto it = std::find_if(s.sweep.begin(), s.sweep.end(),
                           [&](const auto &q) { return std::abs(q.ratio - t.dip_ratio) < 1e-9; });
    const double margin = std::min((it - 1)->a_over_d, (it + 1)->a_over_d) - a_dip;
    bool peak_is_max = true;
    for (const auto &q : s.sweep)
        if (std::abs(q.ratio - t.peak_ratio) > 1e-9 && q.a_over_d >= a_peak) peak_is_max = false;
    const double ep = (a_peak - t.peak_a_over_d) / t.peak_tolerance;
    s.score = ep * ep - 2.0 * margin + std::max(0.0, a_high - t.high_ratio_max);
    s.feasible = peak_is_max && std::abs(a_peak - t.peak_a_over_d) <= t.peak_tolerance && margin >= t.dip_margin &&
                 a_high < t.high_ratio_max;
    std::ostringstream note;
    note << "peak=" << a_peak << " dip_margin=" << margin << " high=" << a_high << (peak_is_max ? "" : " not-max");
    s.note = note.str();
    return s;
}

/// Two-stage search. Stage 1 scores every (ε, A, C_L0, γ_f) on the lock-in
/// curve; candidates within tolerance are taken best-first into stage 2, which
/// picks κ_r from its grid against the lock-on targets. The first candidate
/// with a feasible κ_r wins. Deterministic for a given grid.
[[nodiscard]] inline CalibrationReport calibrate(const plant::PlantParams &base, const LockInTargets &lock_in,
                                                 const LockOnTargets &lock_on, const CalibrationGrid &grid,
                                                 const actuator::MotorParams &motor,
                                                 const baseline::PidTuning &tuning, int jobs = 1) {
    lock_in.validate();
    lock_on.validate();
    grid.validate();
    std::vector<plant::WakeModelParams> combos;
    for (double eps : grid.vdp_epsilon)
        for (double a : grid.coupling_A)
            for (double cl : grid.base_lift_coeff)
                for (double gf : grid.fluid_damping_coeff) {
                    plant::WakeModelParams w = base.wake;
                    w.vdp_epsilon = eps;
                    w.coupling_A = a;
                    w.base_lift_coeff = cl;
                    w.fluid_damping_coeff = gf;
                    w.rotation_coupling = 0.0;
                    combos.push_back(w);
                }

    CalibrationReport rep;
    rep.lock_in_candidates = parallel_map(combos.size(), jobs,
                                          [&](std::size_t i) { return score_lock_in(base, combos[i], lock_in); });
    std::vector<std::size_t> order(rep.lock_in_candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rep.lock_in_candidates[a].score < rep.lock_in_candidates[b].score;
    });
    if (order.empty()) {
        rep.message = "calibration grid is empty";
        return rep;
    }
    rep.lock_in = rep.lock_in_candidates[order.front()];
    rep.wake = rep.lock_in.wake;

    bool any_within = false;
    double best_lock_on = std::numeric_limits<double>::infinity();
    for (std::size_t idx : order) {
        const LockInScore &cand = rep.lock_in_candidates[idx];
        if (!cand.within_tolerance) continue;
        if (!any_within) {
            rep.lock_in = cand;
            rep.wake = cand.wake;
        }
        any_within = true;
        auto scores = parallel_map(grid.rotation_coupling.size(), jobs, [&](std::size_t k) {
            return score_lock_on(base, cand.wake, grid.rotation_coupling[k], motor, tuning, lock_on);
        });
        const LockOnScore *best = nullptr;
        for (const auto &s : scores) {
            if (s.score < best_lock_on) {
                best_lock_on = s.score;
                rep.lock_on = s;
                rep.lock_in = cand;
                rep.wake = cand.wake;
                rep.wake.rotation_coupling = s.rotation_coupling;
            }
            if (s.feasible && (!best || s.score < best->score)) best = &s;
        }
        rep.lock_on_candidates.insert(rep.lock_on_candidates.end(), scores.begin(), scores.end());
        if (best) {
            rep.success = true;
            rep.lock_in = cand;
            rep.lock_on = *best;
            rep.wake = cand.wake;
            rep.wake.rotation_coupling = best->rotation_coupling;
            rep.message = "calibrated";
            return rep;
        }
    }
    std::ostringstream msg;
    if (!any_within) {
        msg << "no wake parameters reach peak A/D " << lock_in.peak_a_over_d << " +/- " << lock_in.peak_tolerance
            << " with a band covering U in [" << lock_in.cover_lo_u << ", " << lock_in.cover_hi_u
            << "]; best candidate peak " << rep.lock_in.peak_a_over_d << " band [" << rep.lock_in.band_lo_u << ", "
            << rep.lock_in.band_hi_u << "]";
    } else {
        msg << "no rotation coupling in the grid reproduces the lock-on sweep shape; best candidate "
            << rep.lock_on.note;
    }
    rep.message = msg.str();
    return rep;
}

inline void write_lock_in_candidates_csv(std::ostream &os, const CalibrationReport &rep) {
    os << "vdp_epsilon,coupling_A,base_lift_coeff,fluid_damping_coeff,peak_a_over_d,peak_u,band_lo_u,band_hi_u,"
          "score,within_tolerance\n";
    os.precision(10);
    for (const auto &c : rep.lock_in_candidates)
        os << c.wake.vdp_epsilon << ',' << c.wake.coupling_A << ',' << c.wake.base_lift_coeff << ','
           << c.wake.fluid_damping_coeff << ',' << c.peak_a_over_d << ',' << c.peak_u << ',' << c.band_lo_u << ','
           << c.band_hi_u << ',' << c.score << ',' << (c.within_tolerance ? 1 : 0) << '\n';
}

}  // namespace vivrl::calib
