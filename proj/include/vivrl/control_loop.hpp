// Agent-environment protocol: observations, reward, episodes on the 100 ms
// command grid with 1 ms physics substeps, training and deterministic evaluation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vivrl/actuator.hpp"
#include "vivrl/analysis.hpp"
#include "vivrl/error.hpp"
#include "vivrl/plant.hpp"
#include "vivrl/ppo.hpp"
#include "vivrl/record.hpp"

namespace vivrl::loop {

struct ObservationSpec {
    int n_past_actions = 0;
    double diameter_m = 0.0175;
    double fn_hz = 1.96;

    [[nodiscard]] std::size_t dim() const { return 2 + static_cast<std::size_t>(n_past_actions); }

    void validate() const {
        detail::require(n_past_actions >= 0 && n_past_actions <= 16, "observation: n_past_actions must lie in [0, 16]");
        detail::require(diameter_m > 0 && fn_hz > 0, "observation: normalizers must be positive");
    }
};

struct EpisodeConfig {
    double duration_periods = 25.0;
    int steps_per_episode = 128;
    double action_interval_s = 0.1;
    double physics_dt_s = 1e-3;
    double eval_duration_s = 50.0;
    double eval_lead_in_s = 10.0;
    bool reward_interval_mean = false;  ///< mean |Y/D| over the interval instead of the end sample
    bool random_initial_phase = true;   ///< stochastic episodes start at a random limit-cycle phase
    double abort_reward = -5.0;
    int command_delay_steps = 0;  ///< whole action intervals between a decision and its motor command
    double obs_noise_y = 0.0;     ///< std of additive noise on the observed Y/D
    double obs_noise_ydot = 0.0;  ///< std of additive noise on the observed Ẏ/(f_n D)

    [[nodiscard]] int substeps() const { return static_cast<int>(std::lround(action_interval_s / physics_dt_s)); }

    void validate(double fn_hz) const {
        detail::require(steps_per_episode >= 1, "episode: steps_per_episode must be >= 1");
        detail::require(action_interval_s > 0 && physics_dt_s > 0 && physics_dt_s <= 5e-3,
                        "episode: intervals must be positive and physics_dt_s <= 5 ms");
        detail::require(std::abs(substeps() * physics_dt_s - action_interval_s) < 1e-9,
                        "episode: action_interval_s must be a whole number of physics steps");
        detail::require(eval_duration_s > 0 && eval_lead_in_s >= 0, "episode: evaluation times must be non-negative");
        detail::require(std::isfinite(abort_reward), "episode: abort_reward must be finite");
        detail::require(command_delay_steps >= 0 && command_delay_steps <= 16,
                        "episode: command_delay_steps must lie in [0, 16]");
        detail::require(obs_noise_y >= 0 && obs_noise_ydot >= 0, "episode: observation noise must be non-negative");
        const double horizon = steps_per_episode * action_interval_s;
        detail::require(std::abs(horizon - duration_periods / fn_hz) <= action_interval_s,
                        "episode: steps_per_episode * action_interval_s must match duration_periods / f_n "
                        "within one interval");
    }
};

/// Everything the agent interacts with.
struct Environment {
    plant::PlantParams plant;
    actuator::MotorParams motor;
    EpisodeConfig episode;
    ObservationSpec obs;

    void validate() const {
        plant.validate();
        detail::require(plant.medium == plant::Medium::water && plant.flow.velocity_m_per_s > 0,
                        "environment: control runs need flowing water");
        motor.validate();
        obs.validate();
        episode.validate(obs.fn_hz);
        detail::require(std::abs(motor.command_interval_s - episode.action_interval_s) < 1e-12,
                        "environment: motor command interval must equal the action interval");
    }
};

/// Environment at the plant's flow with normalizers taken from the plant.
[[nodiscard]] inline Environment make_environment(const plant::PlantParams &p, const actuator::MotorParams &m,
                                                  int n_past_actions, const EpisodeConfig &ep = {}) {
    Environment env{p, m, ep, {n_past_actions, p.cylinder.diameter_m, plant::nominal_natural_frequency(p)}};
    env.validate();
    return env;
}

// ---------------------------------------------------------------------------
// Observation and reward
// ---------------------------------------------------------------------------

/// [Y/D, Ẏ/(f_n D), a_{t−1}, …, a_{t−n}]; `history` is most-recent-first and
/// zero-padded when shorter than n.
[[nodiscard]] inline std::vector<double> build_observation(const plant::PlantState &s, std::span<const double> history,
                                                           const ObservationSpec &spec) {
    std::vector<double> obs(spec.dim(), 0.0);
    obs[0] = s.y_m / spec.diameter_m;
    obs[1] = s.ydot_m_per_s / (spec.fn_hz * spec.diameter_m);
    const auto n = static_cast<std::size_t>(spec.n_past_actions);
    for (std::size_t i = 0; i < n && i < history.size(); ++i) obs[2 + i] = history[i];
    return obs;
}

/// Observation as the sensors report it: kinematic entries carry additive
/// Gaussian noise when configured.
template <class Rng>
[[nodiscard]] std::vector<double> sensed_observation(const plant::PlantState &s, std::span<const double> history,
                                                     const ObservationSpec &spec, const EpisodeConfig &ep, Rng &rng) {
    std::vector<double> obs = build_observation(s, history, spec);
    if (ep.obs_noise_y > 0 || ep.obs_noise_ydot > 0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        obs[0] += ep.obs_noise_y * normal(rng);
        obs[1] += ep.obs_noise_ydot * normal(rng);
    }
    return obs;
}

[[nodiscard]] inline double reward(double y_m, double diameter_m) {
    detail::require(diameter_m > 0, "reward: diameter must be positive");
    return -std::abs(y_m / diameter_m);
}

/// Most-recent-first action memory of fixed length.
class ActionHistory {
public:
    explicit ActionHistory(std::size_t n) : buf_(n, 0.0) {}
    void push(double a) {
        if (buf_.empty()) return;
        buf_.pop_back();
        buf_.push_front(a);
    }
    [[nodiscard]] std::vector<double> values() const { return {buf_.begin(), buf_.end()}; }

private:
    std::deque<double> buf_;
};

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

/// States sampled at the physics step over one natural period of the developed
/// uncontrolled limit cycle; episodes start from one of them.
struct LimitCycle {
    std::vector<plant::PlantState> states;
    double amplitude_over_d = 0.0;  ///< steady A/D of the uncontrolled run
};

[[nodiscard]] inline LimitCycle develop_limit_cycle(const Environment &env, double settle_s = 0.0) {
    const plant::PlantParams &p = env.plant;
    const double fn = env.obs.fn_hz;
    const double d = p.cylinder.diameter_m;
    const double dt = env.episode.physics_dt_s;
    const double settle = settle_s > 0 ? settle_s : plant::default_uncontrolled_duration(p);
    const auto steps = static_cast<long>(std::lround(settle / dt));
    const auto period_steps = static_cast<long>(std::lround(1.0 / (fn * dt)));
    const long record_every = std::max<long>(1, static_cast<long>(std::lround(0.01 / dt)));

    plant::PlantState s;
    s.y_m = 0.01 * d;
    RunRecord rec{record_every * dt, {}};
    LimitCycle lc;
    for (long i = 0; i < steps; ++i) {
        s = plant::rk4_step(s, dt, p);
        if (i % record_every == 0) rec.samples.push_back({s.time_s, s.y_m / d});
        if (i >= steps - period_steps) lc.states.push_back(s);
    }
    lc.amplitude_over_d = analysis::steady_amplitude(rec, plant::kSteadyWindowFraction);
    for (auto &st : lc.states) st.time_s = 0.0;
    return lc;
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

/// Mutable plant + motor pair advanced on the command grid.
struct Rig {
    plant::PlantState plant;
    actuator::MotorState motor;
    double t_s = 0.0;
    long tick = 0;
    std::deque<double> in_flight;  ///< decided but not yet delivered commands, oldest first
};

/// Holds `duty` at the current tick, integrates one action interval and
/// returns the reward for it.
inline double advance_interval(Rig &rig, double duty, const Environment &env) {
    const double dt = env.episode.physics_dt_s;
    const int sub = env.episode.substeps();
    const double d = env.plant.cylinder.diameter_m;
    double delivered = duty;
    if (env.episode.command_delay_steps > 0) {
        while (rig.in_flight.size() < static_cast<std::size_t>(env.episode.command_delay_steps))
            rig.in_flight.push_back(0.0);
        rig.in_flight.push_back(duty);
        delivered = rig.in_flight.front();
        rig.in_flight.pop_front();
    }
    rig.motor = actuator::hold_command(rig.motor, delivered,
                                       static_cast<double>(rig.tick) * env.motor.command_interval_s, env.motor);
    double abs_sum = 0.0;
    for (int k = 0; k < sub; ++k) {
        const actuator::MotorState m0 = rig.motor;
        const double t0 = rig.plant.time_s;
        rig.plant = plant::rk4_step(
            rig.plant, [&](double t) { return actuator::rotation_after(m0, t - t0, env.motor); }, dt, env.plant);
        rig.motor = actuator::motor_step(rig.motor, dt, env.motor);
        abs_sum += std::abs(rig.plant.y_m / d);
    }
    ++rig.tick;
    rig.t_s = static_cast<double>(rig.tick) * env.episode.action_interval_s;
    rig.plant.time_s = rig.t_s;
    return env.episode.reward_interval_mean ? -abs_sum / sub : reward(rig.plant.y_m, d);
}

[[nodiscard]] inline RunSample sample_of(const Rig &rig, double duty, double r, const Environment &env) {
    const double d = env.plant.cylinder.diameter_m;
    return {rig.t_s,
            rig.plant.y_m / d,
            rig.plant.ydot_m_per_s / (env.obs.fn_hz * d),
            duty,
            actuator::normalized_speed(rig.motor.omega_rad_per_s, env.plant.flow.velocity_m_per_s, d),
            r};
}

struct EpisodeResult {
    ppo::Trajectory trajectory;
    RunRecord record;
    bool aborted = false;
    std::string abort_reason;

    [[nodiscard]] double mean_reward() const {
        if (trajectory.empty()) return 0.0;
        double s = 0.0;
        for (const auto &t : trajectory.transitions) s += t.reward;
        return s / static_cast<double>(trajectory.size());
    }
};

/// One episode of `steps_per_episode` actions starting on the limit cycle.
/// Stochastic episodes sample actions and a random start phase; deterministic
/// ones use the policy mean and the first stored phase.
template <class Rng>
[[nodiscard]] EpisodeResult run_episode(const Environment &env, const ppo::ActorCritic &ac, const LimitCycle &lc,
                                        Rng &rng, bool stochastic) {
    if (ac.obs_dim() != env.obs.dim()) throw ShapeError("run_episode: policy/observation dimension mismatch");
    if (lc.states.empty()) throw ParameterDomainError("run_episode: limit cycle has no states");
    std::size_t phase = 0;
    if (stochastic && env.episode.random_initial_phase) {
        std::uniform_int_distribution<std::size_t> pick(0, lc.states.size() - 1);
        phase = pick(rng);
    }
    Rig rig;
    rig.plant = lc.states[phase];
    ActionHistory hist(static_cast<std::size_t>(env.obs.n_past_actions));
    const double limit = env.motor.duty_limit;

    EpisodeResult out;
    out.record.sample_interval_s = env.episode.action_interval_s;
    auto &tr = out.trajectory.transitions;
    tr.reserve(static_cast<std::size_t>(env.episode.steps_per_episode));
    std::vector<double> obs = sensed_observation(rig.plant, hist.values(), env.obs, env.episode, rng);
    for (int step = 0; step < env.episode.steps_per_episode; ++step) {
        ppo::Transition t;
        t.obs = obs;
        t.value = ppo::state_value(ac, obs);
        const double mu = ppo::policy_mean(ac, obs);
        if (stochastic) {
            const auto sa = rl::sample_action(std::span<const double>(&mu, 1), ac.head.log_std, rng, limit);
            t.raw_action = sa.raw[0];
            t.action = sa.clamped[0];
            t.logprob = sa.logprob;
        } else {
            t.action = std::clamp(mu, -limit, limit);
            t.raw_action = mu;
            t.logprob = rl::gaussian_logprob(std::span<const double>(&mu, 1), ac.head.log_std,
                                             std::span<const double>(&mu, 1));
        }
        try {
            t.reward = advance_interval(rig, t.action, env);
        } catch (const DivergenceError &e) {
            t.reward = env.episode.abort_reward;
            t.done = true;
            tr.push_back(std::move(t));
            out.aborted = true;
            out.abort_reason = e.what();
            break;
        }
        out.record.samples.push_back(sample_of(rig, t.action, t.reward, env));
        hist.push(t.action);
        obs = sensed_observation(rig.plant, hist.values(), env.obs, env.episode, rng);
        tr.push_back(std::move(t));
    }
    out.trajectory.bootstrap_value = out.aborted ? 0.0 : ppo::state_value(ac, obs);
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic evaluation
// ---------------------------------------------------------------------------

/// Fixed-weight rollout from the first limit-cycle phase: `lead_in_s` of zero
/// duty, then `duration_s` of act_deterministic control. Sensor noise, if
/// configured, is drawn from a generator seeded with `noise_seed`.
[[nodiscard]] inline RunRecord evaluate_deterministic(const Environment &env, const ppo::ActorCritic &ac,
                                                      const LimitCycle &lc, double duration_s, double lead_in_s,
                                                      std::uint64_t noise_seed = 0) {
    if (ac.obs_dim() != env.obs.dim()) throw ShapeError("evaluate: checkpoint/observation dimension mismatch");
    if (lc.states.empty()) throw ParameterDomainError("evaluate: limit cycle has no states");
    detail::require(duration_s > 0 && lead_in_s >= 0, "evaluate: durations must be non-negative");
    const double dt = env.episode.action_interval_s;
    const auto lead_steps = static_cast<long>(std::lround(lead_in_s / dt));
    const auto ctrl_steps = static_cast<long>(std::lround(duration_s / dt));
    Rig rig;
    rig.plant = lc.states.front();
    ActionHistory hist(static_cast<std::size_t>(env.obs.n_past_actions));
    RunRecord rec{dt, {}};
    std::mt19937_64 noise(noise_seed);
    for (long i = 0; i < lead_steps + ctrl_steps; ++i) {
        double duty = 0.0;
        if (i >= lead_steps)
            duty = ppo::act_deterministic(ac, sensed_observation(rig.plant, hist.values(), env.obs, env.episode, noise),
                                          env.motor.duty_limit);
        const double r = advance_interval(rig, duty, env);
        rec.samples.push_back(sample_of(rig, duty, r, env));
        if (i >= lead_steps) hist.push(duty);
    }
    return rec;
}

struct EvalSummary {
    double controlled_a_over_d = 0.0;
    double uncontrolled_a_over_d = 0.0;
    double suppression = 0.0;
    double mean_alpha = 0.0;
    double dominant_freq_ratio = 0.0;  ///< dominant frequency of α over f_n; 0 without actuation
};

/// Dominant frequency of α over f_n, or 0 when α does not oscillate.
[[nodiscard]] inline double actuation_frequency_ratio(const RunRecord &rec, double fn_hz) {
    const auto alpha = rec.alpha();
    if (alpha.size() < 64) return 0.0;
    try {
        return analysis::dominant_frequency(alpha, 1.0 / rec.sample_interval_s) / fn_hz;
    } catch (const AnalysisError &) {
        return 0.0;
    }
}

[[nodiscard]] inline EvalSummary summarize_evaluation(const RunRecord &rec, double lead_in_s,
                                                      double uncontrolled_a_over_d, double fn_hz) {
    const RunRecord ctrl = rec.tail_from(lead_in_s + 0.5 * rec.sample_interval_s);
    EvalSummary s;
    s.uncontrolled_a_over_d = uncontrolled_a_over_d;
    s.controlled_a_over_d = analysis::steady_amplitude(ctrl, plant::kSteadyWindowFraction);
    s.suppression = analysis::suppression_ratio(s.controlled_a_over_d, uncontrolled_a_over_d);
    s.mean_alpha = analysis::mean_alpha(ctrl);
    s.dominant_freq_ratio = actuation_frequency_ratio(ctrl, fn_hz);
    return s;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpisodeLog {
    int episode = 0;
    double mean_reward = 0.0;
    double mean_alpha = 0.0;
    double dominant_freq_ratio = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;
    bool aborted = false;
};

inline constexpr const char *kTrainingLogCsvHeader = "episode,mean_reward,mean_alpha,dominant_freq_ratio,clip_fraction,kl";

inline void write_training_log(std::ostream &os, std::span<const EpisodeLog> log) {
    os << kTrainingLogCsvHeader << '\n';
    os.precision(10);
    for (const auto &e : log)
        os << e.episode << ',' << e.mean_reward << ',' << e.mean_alpha << ',' << e.dominant_freq_ratio << ','
           << e.clip_fraction << ',' << e.kl << '\n';
}

struct TrainConfig {
    Environment env;
    ppo::PpoConfig ppo;
    int episodes = 400;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden{64, 64};
    rl::Activation activation = rl::Activation::tanh;
    double init_log_std = ppo::kInitLogStd;
};

struct TrainResult {
    std::vector<EpisodeLog> log;
    std::optional<ppo::ActorCritic> final_policy;  ///< empty for a 0-episode run
    std::optional<ppo::ActorCritic> best_policy;   ///< policy that collected the best episode
    double best_reward = -std::numeric_limits<double>::infinity();
    double uncontrolled_a_over_d = 0.0;
    bool halted = false;
    std::string halt_reason;

    /// Mean of the per-episode mean reward over the last `k` episodes.
    [[nodiscard]] double final_mean_reward(std::size_t k = 50) const {
        if (log.empty()) return 0.0;
        const std::size_t n = std::min(k, log.size());
        double s = 0.0;
        for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].mean_reward;
        return s / static_cast<double>(n);
    }
    [[nodiscard]] double final_mean_alpha(std::size_t k = 50) const {
        if (log.empty()) return 0.0;
        const std::size_t n = std::min(k, log.size());
        double s = 0.0;
        for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].mean_alpha;
        return s / static_cast<double>(n);
    }
};

using EpisodeCallback = std::function<void(const EpisodeLog &)>;

/// Stochastic episode + one PPO update per episode. A TrainingError halts the
/// run and keeps the last finite policy.
[[nodiscard]] inline TrainResult train(const TrainConfig &cfg, const LimitCycle &lc,
                                       const EpisodeCallback &on_episode = {}) {
    cfg.env.validate();
    cfg.ppo.validate();
    detail::require(cfg.episodes >= 0, "train: episodes must be non-negative");
    TrainResult res;
    res.uncontrolled_a_over_d = lc.amplitude_over_d;
    if (cfg.episodes == 0) return res;

    std::mt19937_64 rng(cfg.seed);
    ppo::ActorCritic ac =
        ppo::make_actor_critic(cfg.env.obs.dim(), rng, cfg.hidden, cfg.activation, cfg.init_log_std);
    ppo::OptimizerStates opt(ac);
    const double fn = cfg.env.obs.fn_hz;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        EpisodeResult er = run_episode(cfg.env, ac, lc, rng, true);
        EpisodeLog row;
        row.episode = ep;
        row.mean_reward = er.mean_reward();
        row.mean_alpha = analysis::mean_alpha(er.record);
        row.dominant_freq_ratio = actuation_frequency_ratio(er.record, fn);
        row.aborted = er.aborted;
        if (row.mean_reward > res.best_reward) {
            res.best_reward = row.mean_reward;
            res.best_policy = ac;
        }
        const ppo::ActorCritic before = ac;
        try {
            const ppo::UpdateMetrics m = ppo::update(ac, er.trajectory, cfg.ppo, opt, rng);
            row.clip_fraction = m.clip_fraction;
            row.kl = m.approx_kl;
        } catch (const TrainingError &e) {
            ac = before;
            res.halted = true;
            res.halt_reason = e.what();
            res.log.push_back(row);
            if (on_episode) on_episode(row);
            break;
        }
        res.log.push_back(row);
        if (on_episode) on_episode(row);
    }
    res.final_policy = ac;
    return res;
}

}  // namespace vivrl::loop
