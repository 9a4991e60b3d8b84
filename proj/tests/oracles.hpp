// Independent reference computations shared by the unit tests and the acceptance run.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vivrl/plant.hpp"
#include "vivrl/ppo.hpp"

namespace vivrl::oracles {

using ppo::ActorCritic;
using ppo::Trajectory;
using ppo::Transition;

// Closed-form free response of M Ÿ + C Ẏ + K Y = 0 from (y0, 0), underdamped.
inline double damped_oscillation(double t, double y0, double k, double m, double c) {
    const double wn = std::sqrt(k / m);
    const double zeta = c / (2 * std::sqrt(k * m));
    const double wd = wn * std::sqrt(1 - zeta * zeta);
    return y0 * std::exp(-zeta * wn * t) * (std::cos(wd * t) + zeta * wn / wd * std::sin(wd * t));
}

inline plant::PlantParams air_params() {
    plant::PlantParams p = plant::default_params();
    p.medium = plant::Medium::air;
    p.flow.velocity_m_per_s = 0.0;
    return p;
}

inline Trajectory random_trajectory(std::mt19937_64 &rng, std::size_t n, std::size_t obs_dim = 0, bool with_done = false) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::bernoulli_distribution terminal(0.15);
    Trajectory t;
    for (std::size_t i = 0; i < n; ++i) {
        Transition tr;
        tr.obs.resize(obs_dim);
        for (auto &o : tr.obs) o = u(rng);
        tr.reward = u(rng);
        tr.value = u(rng);
        tr.done = with_done && terminal(rng);
        t.transitions.push_back(tr);
    }
    t.bootstrap_value = u(rng);
    return t;
}

// A_t = Σ_k (γλ)^k δ_{t+k}, summed directly; a terminal transition ends the sum.
inline std::vector<double> brute_force_gae(const Trajectory &t, double gamma, double lambda) {
    const std::size_t n = t.size();
    std::vector<double> delta(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &tr = t.transitions[i];
        const double next = tr.done ? 0.0 : (i + 1 < n ? t.transitions[i + 1].value : t.bootstrap_value);
        delta[i] = tr.reward + gamma * next - tr.value;
    }
    std::vector<double> adv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        for (std::size_t k = i; k < n; ++k) {
            adv[i] += w * delta[k];
            if (t.transitions[k].done) break;
            w *= gamma * lambda;
        }
    }
    return adv;
}

inline ActorCritic small_actor_critic(std::uint64_t seed, std::size_t obs_dim = 3) {
    std::mt19937_64 rng(seed);
    ActorCritic ac = ppo::make_actor_critic(obs_dim, rng, {8, 8});
    // Larger output weights than the near-zero init so the policy mean varies with obs.
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto &p : ac.actor.params()) p += 0.3 * u(rng);
    ac.head.log_std = {-0.3};
    return ac;
}

// Trajectory whose stored log-probabilities come from a perturbed policy, so ratios differ from 1.
inline Trajectory policy_fixture(const ActorCritic &ac, std::uint64_t seed, std::size_t n = 24) {
    std::mt19937_64 rng(seed);
    Trajectory t = random_trajectory(rng, n, ac.obs_dim());
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto &tr : t.transitions) {
        const double mu = ppo::policy_mean(ac, tr.obs);
        const double sd = std::exp(ac.head.log_std[0]);
        tr.raw_action = mu + sd * g(rng);
        tr.action = std::clamp(tr.raw_action, -0.4, 0.4);
        const double old_mu = mu + 0.15 * g(rng);
        tr.logprob = rl::gaussian_logprob(std::span<const double>(&old_mu, 1), ac.head.log_std,
                                          std::span<const double>(&tr.raw_action, 1));
    }
    return t;
}

inline double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b))); }

}  // namespace vivrl::oracles
