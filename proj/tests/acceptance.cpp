// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,8] [--known-failing 8,9] [--seeds 1,2,3]
//
// Exit status is 0 when every failing criterion is listed in --known-failing.
// Criteria 8-10 share one set of full-length training runs (7 x 400 episodes).
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bandit.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "vivrl/baseline.hpp"
#include "vivrl/calibration.hpp"
#include "vivrl/config.hpp"
#include "vivrl/control_loop.hpp"
#include "vivrl/plant.hpp"
#include "vivrl/ppo.hpp"

using namespace vivrl;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// ---------------------------------------------------------------------------

Verdict skop_griffin_check() {
    const double oracle = 2.0 * kPi * kPi * kPi * 0.21 * 0.21 * (1.0 + 30.3) * 0.012;
    const double got = plant::skop_griffin(0.21, 30.3, 0.012);
    const double rel = std::abs(got - oracle) / oracle;
    bool ok = rel <= 1e-12;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> st(0.05, 0.4), m(0.0, 100.0), z(0.0, 0.1), k(0.1, 10.0);
    int broken = 0;
    for (int i = 0; i < 100; ++i) {
        const double s = st(rng), mr = m(rng), zeta = z(rng), f = k(rng);
        const double base = plant::skop_griffin(s, mr, zeta);
        const bool lin = std::abs(plant::skop_griffin(s, mr, f * zeta) - f * base) <= 1e-12 * std::max(1.0, f * base);
        const bool quad =
            std::abs(plant::skop_griffin(f * s, mr, zeta) - f * f * base) <= 1e-12 * std::max(1.0, f * f * base);
        if (!lin || !quad) ++broken;
    }
    ok = ok && broken == 0;
    return {ok, "S_G = " + fmt(got, 6) + ", rel err " + fmt(rel, 2) + ", homogeneity violations " +
                    std::to_string(broken) + "/100"};
}

Verdict identification_check() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> mass(0.5, 2.0), freq(1.0, 4.0), zeta(0.005, 0.05);
    double worst_f = 0, worst_z = 0;
    for (int i = 0; i < 20; ++i) {
        plant::PlantParams p = plant::default_params();
        p.cylinder.oscillating_mass_kg = mass(rng);
        const double f = freq(rng);
        p.cylinder.stiffness_N_per_m = std::pow(2 * kPi * f, 2) * p.cylinder.oscillating_mass_kg;
        const double z = zeta(rng);
        p.cylinder.structural_damping_Ns_per_m =
            2 * z * std::sqrt(p.cylinder.stiffness_N_per_m * p.cylinder.oscillating_mass_kg);
        const double y0 = 0.5 * p.cylinder.diameter_m;
        const auto air = plant::free_decay(plant::Medium::air, y0, p);
        worst_f = std::max(worst_f, std::abs(air.frequency_hz - f) / f);
        worst_z = std::max(worst_z, std::abs(air.zeta - z) / z);
        const double m_w = p.cylinder.oscillating_mass_kg + p.wake.added_mass_coeff * p.cylinder.displaced_mass_kg;
        const double f_w = plant::natural_frequency(p.cylinder.stiffness_N_per_m, m_w);
        const double z_w = plant::damping_ratio(p.cylinder.structural_damping_Ns_per_m, p.cylinder.stiffness_N_per_m, m_w);
        const auto water = plant::free_decay(plant::Medium::water, y0, p);
        worst_f = std::max(worst_f, std::abs(water.frequency_hz - f_w) / f_w);
        worst_z = std::max(worst_z, std::abs(water.zeta - z_w) / z_w);
    }
    const auto rig = config::plant_params(testing::calibrated_config());
    const double y0 = 0.5 * rig.cylinder.diameter_m;
    const double f_rig = plant::free_decay(plant::Medium::water, y0, rig).frequency_hz;
    const double z_air = plant::free_decay(plant::Medium::air, y0, rig).zeta;
    const bool ok = worst_f <= 0.01 && worst_z <= 0.05 && std::abs(f_rig - 1.96) <= 0.01 * 1.96 &&
                    std::abs(z_air - 1.02e-2) <= 0.05 * 1.02e-2;
    return {ok, "worst f err " + fmt(100 * worst_f, 3) + "%, worst zeta err " + fmt(100 * worst_z, 3) +
                    "%; rig f = " + fmt(f_rig) + " Hz, zeta_air = " + fmt(z_air)};
}

Verdict integrator_check() {
    const auto p = oracles::air_params();
    const double k = p.cylinder.stiffness_N_per_m, m = p.cylinder.oscillating_mass_kg,
                 c = p.cylinder.structural_damping_Ns_per_m;
    const double y0 = 0.005, horizon = 5.0;
    auto error_at = [&](double dt) {
        plant::PlantState s;
        s.y_m = y0;
        const auto n = static_cast<int>(std::lround(horizon / dt));
        for (int i = 0; i < n; ++i) s = plant::rk4_step(s, dt, p);
        return std::abs(s.y_m - oracles::damped_oscillation(horizon, y0, k, m, c));
    };
    const double ratio = error_at(4e-3) / error_at(2e-3);

    plant::PlantState s;
    s.y_m = 0.5 * p.cylinder.diameter_m;
    double e = plant::mechanical_energy(s, p);
    long increases = 0;
    for (long i = 0; i < 1'000'000; ++i) {
        s = plant::rk4_step(s, plant::kPhysicsDt, p);
        const double next = plant::mechanical_energy(s, p);
        if (next > e) ++increases;
        e = next;
    }
    return {ratio >= 8.0 && increases == 0,
            "step-halving error ratio " + fmt(ratio) + ", energy increases in 1e6 steps: " + std::to_string(increases)};
}

// Shared between criteria 4 and 5.
std::optional<calib::CalibrationReport> g_calibration;

const calib::CalibrationReport &calibration() {
    if (!g_calibration) {
        const auto c = config::load(testing::default_config_path());
        g_calibration = calib::calibrate(config::plant_params(c), c.lock_in, c.lock_on, c.grid, config::motor_params(c),
                                         c.pid);
    }
    return *g_calibration;
}

config::ExperimentConfig calibrated() {
    auto c = config::load(testing::default_config_path());
    c.wake = calibration().wake;
    return c;
}

Verdict lock_in_check() {
    const auto &rep = calibration();
    if (!rep.success) return {false, "calibration failed: " + rep.message};
    const auto c = calibrated();
    const auto sweep = plant::amplitude_sweep(c.lock_in.u_grid, config::plant_params(c));
    std::size_t ip = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i)
        if (sweep[i].a_over_d > sweep[ip].a_over_d) ip = i;
    const double thr = c.lock_in.band_threshold;
    std::size_t lo = ip, hi = ip;
    while (lo > 0 && sweep[lo - 1].a_over_d > thr) --lo;
    while (hi + 1 < sweep.size() && sweep[hi + 1].a_over_d > thr) ++hi;
    const double peak = sweep[ip].a_over_d;
    const bool ok = peak >= 0.55 && peak <= 0.65 && sweep[lo].x <= 5.0 && sweep[hi].x >= 8.0;
    return {ok, "peak A/D " + fmt(peak) + " at U = " + fmt(sweep[ip].x) + ", band (A/D > " + fmt(thr) + ") U in [" +
                    fmt(sweep[lo].x) + ", " + fmt(sweep[hi].x) + "]"};
}

Verdict lock_on_check() {
    const auto c = calibrated();
    const std::vector<double> ratios{0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
    auto setup = config::lock_on_setup(c);
    setup.alpha0 = 1.0;
    const auto pts = baseline::frequency_sweep(ratios, setup);
    std::map<double, double> a;
    std::string curve;
    for (const auto &p : pts) {
        a[p.ratio] = p.a_over_d;
        curve += (curve.empty() ? "" : " ") + fmt(p.ratio, 2) + ":" + fmt(p.a_over_d, 3);
    }
    const auto top = std::max_element(pts.begin(), pts.end(),
                                      [](const auto &x, const auto &y) { return x.a_over_d < y.a_over_d; });
    const bool peak = std::abs(top->ratio - 1.0) < 1e-9 && std::abs(top->a_over_d - 0.65) <= 0.1;
    const bool dip = a[0.8] < a[0.6] && a[0.8] < a[1.0];
    const bool high = a[1.6] < 0.1;
    return {peak && dip && high, "A/D by f_r/f_n {" + curve + "}; peak " + (peak ? "ok" : "off") + ", dip " +
                                     (dip ? "ok" : "missing") + ", 1.6 " + (high ? "ok" : "too high")};
}

Verdict ppo_math_check() {
    using namespace ppo;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double gae_err = 0;
    for (int f = 0; f < 100; ++f) {
        const auto t = oracles::random_trajectory(rng, 1 + static_cast<std::size_t>(u01(rng) * 40), 0, f % 2 == 1);
        const double gamma = 0.8 + 0.2 * u01(rng), lambda = u01(rng);
        const auto got = compute_gae(t, gamma, lambda, false).advantages;
        const auto want = oracles::brute_force_gae(t, gamma, lambda);
        for (std::size_t i = 0; i < got.size(); ++i) gae_err = std::max(gae_err, std::abs(got[i] - want[i]));
    }
    const bool surrogate = clipped_surrogate(1.5, 1.0, 0.2) == 1.2 && clipped_surrogate(0.5, -1.0, 0.2) == -0.8;

    double worst = 0;
    for (std::uint64_t seed : {6u, 7u, 8u}) {
        const auto ac = oracles::small_actor_critic(seed);
        const auto t = oracles::policy_fixture(ac, seed + 100);
        const auto adv = compute_gae(t, 0.99, 0.95, true);
        std::vector<std::size_t> idx(t.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        PpoConfig cfg;
        cfg.entropy_coef = 0.01;
        const Batch batch{t.transitions, adv.advantages, adv.returns, idx};
        const auto res = ppo_loss(batch, ac, cfg);
        const double h = 1e-6;
        auto probe = [&](auto &&param_of, double analytic) {
            ActorCritic plus = ac, minus = ac;
            param_of(plus) += h;
            param_of(minus) -= h;
            const double fd = (ppo_loss(batch, plus, cfg).loss - ppo_loss(batch, minus, cfg).loss) / (2 * h);
            worst = std::max(worst, oracles::relative_gap(analytic, fd));
        };
        for (std::size_t i = 0; i < ac.actor.param_count(); ++i)
            probe([i](ActorCritic &x) -> double & { return x.actor.params()[i]; }, res.grads.actor[i]);
        for (std::size_t i = 0; i < ac.critic.param_count(); ++i)
            probe([i](ActorCritic &x) -> double & { return x.critic.params()[i]; }, res.grads.critic[i]);
        probe([](ActorCritic &x) -> double & { return x.head.log_std[0]; }, res.grads.log_std[0]);
    }
    return {gae_err <= 1e-10 && surrogate && worst < 1e-4,
            "GAE max abs err " + fmt(gae_err, 2) + ", surrogate examples " + (surrogate ? "exact" : "wrong") +
                ", worst gradient rel gap " + fmt(worst, 2)};
}

Verdict bandit_check() {
    int converged = 0;
    std::string means;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = testing::run_bandit(seed);
        if (std::abs(r.final_mean - 0.2) <= 0.03) ++converged;
        means += (means.empty() ? "" : ", ") + fmt(r.final_mean, 3);
    }
    return {converged >= 4, std::to_string(converged) + "/5 seeds within 0.03 of 0.2 (means " + means + ")"};
}

// ---------------------------------------------------------------------------
// Training runs for criteria 8-10

struct RunOutcome {
    int n_past = 0;
    std::uint64_t seed = 0;
    double final_reward = 0;
    double final_alpha = 0;
    loop::EvalSummary eval;
    std::string log_bytes;
    std::string checkpoint_bytes;
    bool halted = false;
};

RunOutcome train_and_evaluate(int n_past, std::uint64_t seed) {
    auto c = calibrated();
    c.n_past_actions = n_past;
    c.seed = seed;
    const auto tc = config::train_config(c);
    const auto lc = loop::develop_limit_cycle(tc.env);
    const auto res = loop::train(tc, lc);
    RunOutcome out;
    out.n_past = n_past;
    out.seed = seed;
    out.halted = res.halted;
    out.final_reward = res.final_mean_reward();
    out.final_alpha = res.final_mean_alpha();
    std::ostringstream log;
    loop::write_training_log(log, res.log);
    out.log_bytes = log.str();
    if (res.final_policy) {
        std::ostringstream ck;
        config::write_checkpoint(ck, *res.final_policy,
                                 {static_cast<std::uint32_t>(tc.env.obs.dim()), static_cast<std::uint32_t>(n_past),
                                  seed, config::config_hash(c), static_cast<std::int32_t>(res.log.size())});
        out.checkpoint_bytes = ck.str();
        const auto rec = loop::evaluate_deterministic(tc.env, *res.final_policy, lc, c.episode.eval_duration_s,
                                                      c.episode.eval_lead_in_s);
        out.eval = loop::summarize_evaluation(rec, c.episode.eval_lead_in_s, lc.amplitude_over_d, tc.env.obs.fn_hz);
    }
    return out;
}

std::vector<std::uint64_t> g_seeds{1, 2, 3};
std::map<std::pair<int, std::uint64_t>, RunOutcome> g_runs;

const RunOutcome &run(int n_past, std::uint64_t seed) {
    const auto key = std::make_pair(n_past, seed);
    if (!g_runs.count(key)) {
        const auto t0 = std::chrono::steady_clock::now();
        g_runs[key] = train_and_evaluate(n_past, seed);
        const auto &r = g_runs[key];
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "  trained n=" << n_past << " seed=" << seed << " (" << fmt(secs, 3)
                  << " s): final-50 reward " << fmt(r.final_reward) << ", mean alpha " << fmt(r.final_alpha)
                  << ", suppression " << fmt(r.eval.suppression) << ", actuation f/f_n "
                  << fmt(r.eval.dominant_freq_ratio) << (r.halted ? " [halted]" : "") << '\n';
    }
    return g_runs[key];
}

const RunOutcome &best(int n_past) {
    const RunOutcome *b = nullptr;
    for (auto s : g_seeds) {
        const auto &r = run(n_past, s);
        if (!b || r.eval.suppression > b->eval.suppression) b = &r;
    }
    return *b;
}

Verdict delay_memory_check() {
    bool ordering = true;
    std::string per_seed;
    for (auto s : g_seeds) {
        const auto &r0 = run(0, s);
        const auto &r2 = run(2, s);
        ordering = ordering && r2.final_reward > r0.final_reward;
        per_seed += (per_seed.empty() ? "" : ", ") + std::string("s") + std::to_string(s) + " " +
                    fmt(r2.final_reward, 3) + " vs " + fmt(r0.final_reward, 3);
    }
    const auto &b0 = best(0);
    const auto &b2 = best(2);
    const bool suppression = b2.eval.suppression >= 0.9 && b0.eval.suppression >= 0.6 && b0.eval.suppression <= 0.9;
    const bool frequency = b0.eval.dominant_freq_ratio < 1.0 && b2.eval.dominant_freq_ratio > 1.5;
    return {ordering && suppression && frequency,
            std::string("(i) ") + (ordering ? "ok" : "FAIL") + " [n=2 vs n=0 final-50 reward: " + per_seed + "]; (ii) " +
                (suppression ? "ok" : "FAIL") + " [best suppression n=2 " + fmt(b2.eval.suppression, 3) + ", n=0 " +
                fmt(b0.eval.suppression, 3) + "]; (iii) " + (frequency ? "ok" : "FAIL") + " [actuation f/f_n n=0 " +
                fmt(b0.eval.dominant_freq_ratio, 3) + ", n=2 " + fmt(b2.eval.dominant_freq_ratio, 3) + "]"};
}

Verdict mean_rotation_check() {
    const auto &b0 = best(0);
    return {std::abs(b0.final_alpha) < 0.05,
            "final-50 mean alpha of the best n=0 run (seed " + std::to_string(b0.seed) + ") = " + fmt(b0.final_alpha)};
}

Verdict determinism_check() {
    const std::uint64_t seed = g_seeds.front();
    const auto &first = run(2, seed);
    const auto again = train_and_evaluate(2, seed);
    const bool same_log = first.log_bytes == again.log_bytes && !first.log_bytes.empty();
    const bool same_ck = first.checkpoint_bytes == again.checkpoint_bytes && !first.checkpoint_bytes.empty();
    return {same_log && same_ck, std::string("training log ") + (same_log ? "identical" : "differs") + " (" +
                                     std::to_string(first.log_bytes.size()) + " B), checkpoint " +
                                     (same_ck ? "identical" : "differs") + " (" +
                                     std::to_string(first.checkpoint_bytes.size()) + " B)"};
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only, known;
    app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
    app.add_option("--known-failing", known, "Criteria whose failure does not fail the run")->delimiter(',');
    app.add_option("--seeds", g_seeds, "Training seeds for criteria 8-10")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"Skop-Griffin parameter", skop_griffin_check},
        {"free-decay identification", identification_check},
        {"RK4 integrator", integrator_check},
        {"lock-in calibration", lock_in_check},
        {"lock-on sweep shape", lock_on_check},
        {"PPO math", ppo_math_check},
        {"bandit sanity", bandit_check},
        {"delay-memory claim", delay_memory_check},
        {"mean-rotation convergence", mean_rotation_check},
        {"determinism", determinism_check},
    };
    const std::set<int> selected(only.begin(), only.end());
    const std::set<int> allowed(known.begin(), known.end());
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string status = v.pass ? "PASS" : "FAIL";
        if (!v.pass && allowed.count(id)) status = "FAIL (known)";
        if (!v.pass && !allowed.count(id)) ++unexpected;
        std::cout << "criterion " << id << " " << status << "  " << criteria[i].first << ": " << v.detail << "  ["
                  << fmt(secs, 3) << " s]" << std::endl;
    }
    return unexpected == 0 ? 0 : 1;
}
