// Proximal policy optimization: clipped surrogate, generalized advantage
// estimation and one minibatched update per collected trajectory.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "vivrl/error.hpp"
#include "vivrl/rl_core.hpp"

namespace vivrl::ppo {

struct Transition {
    std::vector<double> obs;
    double action = 0.0;      ///< duty actually applied (clamped)
    double raw_action = 0.0;  ///< Gaussian sample before clamping
    double logprob = 0.0;     ///< log π_old(raw_action | obs)
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
};

struct Trajectory {
    std::vector<Transition> transitions;
    double bootstrap_value = 0.0;  ///< V(s_N) for time-truncated episodes

    [[nodiscard]] std::size_t size() const { return transitions.size(); }
    [[nodiscard]] bool empty() const { return transitions.empty(); }
};

struct PpoConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    int epochs_per_update = 10;
    int minibatch_size = 32;
    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    double entropy_coef = 0.003;
    double value_coef = 0.5;
    bool normalize_advantages = true;

    void validate() const {
        detail::require(gamma > 0 && gamma <= 1, "ppo: gamma must lie in (0, 1]");
        detail::require(gae_lambda > 0 && gae_lambda <= 1, "ppo: gae_lambda must lie in (0, 1]");
        detail::require(clip_eps > 0 && clip_eps <= 0.5, "ppo: clip_eps must lie in (0, 0.5]");
        detail::require(epochs_per_update >= 1 && minibatch_size >= 1, "ppo: epochs and minibatch must be >= 1");
        detail::require(lr_actor > 0 && lr_critic > 0, "ppo: learning rates must be positive");
        detail::require(entropy_coef >= 0 && value_coef >= 0, "ppo: loss coefficients must be non-negative");
    }
};

struct ActorCritic {
    rl::DenseNet actor;
    rl::GaussianHead head;
    rl::DenseNet critic;

    [[nodiscard]] std::size_t obs_dim() const { return actor.input_dim(); }

    friend bool operator==(const ActorCritic &, const ActorCritic &) = default;
};

inline constexpr double kInitLogStd = -0.5;

/// obs_dim → hidden… → 1 actor (output gain 0.01) and critic (output gain 1).
template <class Rng>
[[nodiscard]] ActorCritic make_actor_critic(std::size_t obs_dim, Rng &rng, std::vector<std::size_t> hidden = {64, 64},
                                            rl::Activation act = rl::Activation::tanh,
                                            double init_log_std = kInitLogStd) {
    std::vector<std::size_t> dims{obs_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    ActorCritic ac{rl::DenseNet(dims, act), rl::GaussianHead{{init_log_std}}, rl::DenseNet(dims, act)};
    ac.actor.init_orthogonal(rng, 1.0, 0.01);
    ac.critic.init_orthogonal(rng, 1.0, 1.0);
    ac.head.clamp();
    return ac;
}

[[nodiscard]] inline double policy_mean(const ActorCritic &ac, std::span<const double> obs) {
    return ac.actor.forward(obs)[0];
}

[[nodiscard]] inline double state_value(const ActorCritic &ac, std::span<const double> obs) {
    return ac.critic.forward(obs)[0];
}

/// Mean action, clipped to the duty bound.
[[nodiscard]] inline double act_deterministic(const ActorCritic &ac, std::span<const double> obs,
                                              double limit = 0.4) {
    if (obs.size() != ac.obs_dim()) throw ShapeError("act_deterministic: observation dimension mismatch");
    return std::clamp(policy_mean(ac, obs), -limit, limit);
}

// ---------------------------------------------------------------------------
// Advantage estimation
// ---------------------------------------------------------------------------

struct AdvantageResult {
    std::vector<double> advantages;  ///< normalized when requested
    std::vector<double> returns;     ///< raw advantage + value
};

/// δ_t = r_t + γ V_{t+1} − V_t, A_t = Σ_k (γλ)^k δ_{t+k}, returns_t = A_t + V_t.
/// A `done` transition cuts the recursion and has no successor value.
[[nodiscard]] inline AdvantageResult compute_gae(const Trajectory &traj, double gamma, double lambda,
                                                 bool normalize = true) {
    if (traj.empty()) throw TrainingError("compute_gae: empty trajectory");
    const std::size_t n = traj.size();
    AdvantageResult out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double next_value = traj.bootstrap_value;
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const auto &tr = traj.transitions[i];
        const double nonterminal = tr.done ? 0.0 : 1.0;
        const double delta = tr.reward + gamma * next_value * nonterminal - tr.value;
        running = delta + gamma * lambda * nonterminal * running;
        out.advantages[i] = running;
        out.returns[i] = running + tr.value;
        next_value = tr.value;
    }
    if (normalize && n > 1) {
        const double mean = std::accumulate(out.advantages.begin(), out.advantages.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double a : out.advantages) var += (a - mean) * (a - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        for (auto &a : out.advantages) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Clipped surrogate for one sample: min(ρA, clip(ρ, 1−ε, 1+ε)A).
[[nodiscard]] inline double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage);
}

struct LossGradients {
    std::vector<double> actor;
    std::vector<double> log_std;
    std::vector<double> critic;
};

struct LossResult {
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;  ///< mean (ρ − 1) − log ρ
    LossGradients grads;
};

/// Samples entering one loss evaluation.
struct Batch {
    std::span<const Transition> transitions;
    std::span<const double> advantages;
    std::span<const double> returns;
    std::span<const std::size_t> indices;  ///< subset of transitions to use
};

/// L = −mean(min(ρA, clip(ρ)A)) + c_v mean((V − R)²) − c_e H, with exact gradients.
[[nodiscard]] inline LossResult ppo_loss(const Batch &batch, const ActorCritic &ac, const PpoConfig &cfg) {
    const std::size_t b = batch.indices.size();
    if (b == 0) throw TrainingError("ppo_loss: empty batch");
    LossResult res;
    res.grads.actor.assign(ac.actor.param_count(), 0.0);
    res.grads.log_std.assign(ac.head.log_std.size(), 0.0);
    res.grads.critic.assign(ac.critic.param_count(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(b);
    const double log_std = ac.head.log_std.at(0);
    const double inv_var = std::exp(-2.0 * log_std);
    rl::ForwardCache actor_cache, critic_cache;
    int clipped = 0;
    for (std::size_t idx : batch.indices) {
        const Transition &tr = batch.transitions[idx];
        const double adv = batch.advantages[idx];
        const double ret = batch.returns[idx];

        const double mu = ac.actor.forward(tr.obs, actor_cache)[0];
        const double lp = rl::gaussian_logprob(std::span<const double>(&mu, 1), ac.head.log_std,
                                               std::span<const double>(&tr.raw_action, 1));
        const double log_ratio = lp - tr.logprob;
        const double ratio = std::exp(log_ratio);
        if (!std::isfinite(ratio)) {
            std::ostringstream os;
            os << "ppo_loss: non-finite probability ratio (logp_new=" << lp << ", logp_old=" << tr.logprob
               << ", mean=" << mu << ", log_std=" << log_std << ", action=" << tr.raw_action << ")";
            throw TrainingError(os.str());
        }
        const double surr = clipped_surrogate(ratio, adv, cfg.clip_eps);
        res.policy_loss -= surr * inv_b;
        res.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
        if (std::abs(ratio - 1.0) > cfg.clip_eps) ++clipped;

        // d(−surr)/d log π: the unclipped branch is active iff ρA <= clip(ρ)A.
        const bool unclipped_active = ratio * adv <= std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        const double dloss_dlp = unclipped_active ? -ratio * adv * inv_b : 0.0;
        if (dloss_dlp != 0.0) {
            const double diff = tr.raw_action - mu;
            const double dlp_dmu = diff * inv_var;
            const double dlp_dls = diff * diff * inv_var - 1.0;
            const double up = dloss_dlp * dlp_dmu;
            ac.actor.backward(actor_cache, std::span<const double>(&up, 1), res.grads.actor);
            res.grads.log_std[0] += dloss_dlp * dlp_dls;
        }

        const double v = ac.critic.forward(tr.obs, critic_cache)[0];
        const double err = v - ret;
        res.value_loss += err * err * inv_b;
        const double dv = cfg.value_coef * 2.0 * err * inv_b;
        ac.critic.backward(critic_cache, std::span<const double>(&dv, 1), res.grads.critic);
    }
    res.entropy = rl::gaussian_entropy(ac.head.log_std);
    for (auto &g : res.grads.log_std) g -= cfg.entropy_coef;
    res.clip_fraction = static_cast<double>(clipped) * inv_b;
    res.loss = res.policy_loss + cfg.value_coef * res.value_loss - cfg.entropy_coef * res.entropy;
    return res;
}

// ---------------------------------------------------------------------------
// Update
// ---------------------------------------------------------------------------

struct OptimizerStates {
    rl::AdamState actor;
    rl::AdamState log_std;
    rl::AdamState critic;

    OptimizerStates() = default;
    explicit OptimizerStates(const ActorCritic &ac)
        : actor(ac.actor.param_count()), log_std(ac.head.log_std.size()), critic(ac.critic.param_count()) {}
};

struct UpdateMetrics {
    double loss = 0.0;          ///< mean loss over all minibatch steps
    double approx_kl = 0.0;     ///< KL(old ‖ new) estimate over the whole trajectory after the update
    double clip_fraction = 0.0; ///< mean fraction of clipped ratios over all minibatch steps
    int minibatch_steps = 0;
};

/// epochs × shuffled minibatches of ppo_loss + Adam on one trajectory.
template <class Rng>
UpdateMetrics update(ActorCritic &ac, const Trajectory &traj, const PpoConfig &cfg, OptimizerStates &opt, Rng &rng) {
    if (traj.empty()) throw TrainingError("update: empty trajectory");
    const AdvantageResult adv = compute_gae(traj, cfg.gamma, cfg.gae_lambda, cfg.normalize_advantages);
    const std::size_t n = traj.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto mb = static_cast<std::size_t>(cfg.minibatch_size);

    UpdateMetrics m;
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += mb) {
            const std::size_t stop = std::min(n, start + mb);
            const Batch batch{traj.transitions, adv.advantages, adv.returns,
                              std::span<const std::size_t>(order.data() + start, stop - start)};
            const LossResult lr = ppo_loss(batch, ac, cfg);
            rl::adam_update(ac.actor.params(), lr.grads.actor, opt.actor, cfg.lr_actor);
            rl::adam_update(ac.head.log_std, lr.grads.log_std, opt.log_std, cfg.lr_actor);
            rl::adam_update(ac.critic.params(), lr.grads.critic, opt.critic, cfg.lr_critic);
            ac.head.clamp();
            m.loss += lr.loss;
            m.clip_fraction += lr.clip_fraction;
            ++m.minibatch_steps;
        }
    }
    if (m.minibatch_steps > 0) {
        m.loss /= m.minibatch_steps;
        m.clip_fraction /= m.minibatch_steps;
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    m.approx_kl = ppo_loss(Batch{traj.transitions, adv.advantages, adv.returns, all}, ac, cfg).approx_kl;
    if (!ac.actor.all_finite() || !ac.critic.all_finite())
        throw TrainingError("update: network parameters became non-finite");
    return m;
}

}  // namespace vivrl::ppo
