#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "porrl/rng.hpp"

namespace porrl {

/// Base class of every error raised by the library.
class PorrlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad shapes, missing entries, bad values).
class SpecError : public PorrlError {
public:
    using PorrlError::PorrlError;
};

/// Instance exceeds the exact-mode size cap.
class SizeError : public PorrlError {
public:
    using PorrlError::PorrlError;
};

/// Default cap on the number of histories of a single length.
inline constexpr std::uint64_t kDefaultHistoryCap = 1'000'000;

enum class Activation { identity, logistic };
enum class NoiseKind { bernoulli, gaussian };

double activate(Activation act, double x);
std::string to_string(Activation act);
std::string to_string(NoiseKind kind);

/**
 * @brief Tabular environment with partially observed reward-states.
 *
 * Steps are numbered 1..H. A history of length h is the sequence
 * (s_1,a_1,...,s_h,a_h), packed into the mixed-radix integer
 * code(τ[h]) = code(τ[h-1])·(S·A) + s_h·A + a_h with code(τ[0]) = 0.
 * Per-feedback-step tables (decoder, reward, noise scale) are stored in the
 * order of `feedback_steps`.
 */
struct PormdpSpec {
    int num_states = 1;
    int num_actions = 1;
    int horizon = 1;
    std::vector<int> feedback_steps;     ///< ascending, each in [1, H]
    std::vector<double> transitions;     ///< flat [s][a][s']
    int initial_state = 0;
    int num_internal = 1;
    std::vector<std::vector<int>> decoder;     ///< [k][code of length h_k] -> internal state
    std::vector<std::vector<double>> reward;   ///< [k][(s·U + u)·A + a]
    double reward_bound = 1.0;
    Activation activation = Activation::identity;
    NoiseKind noise = NoiseKind::bernoulli;
    std::vector<double> noise_scale;     ///< [k] gaussian standard deviation; unused for bernoulli

    double P(int s, int a, int s_next) const {
        return transitions[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s_next];
    }
    double r(int k, int s, int u, int a) const {
        return reward[k][(static_cast<std::size_t>(s) * num_internal + u) * num_actions + a];
    }
    int num_feedback() const { return static_cast<int>(feedback_steps.size()); }
    /// Position of step h in feedback_steps, or -1 when h receives no feedback.
    int feedback_index(int h) const;
    bool is_feedback_step(int h) const { return feedback_index(h) >= 0; }
    /// Sub-gaussian scale of the feedback at feedback position k (1/2 for bernoulli).
    double noise_eta(int k) const;

    /// Throws SpecError on the first violated structural invariant.
    void validate() const;
};

/// Reward-on-history tables f_h indexed [h][code]; rows for steps without feedback are empty.
using HistoryRewards = std::vector<std::vector<double>>;

/// (S·A)^h, throwing SizeError when it exceeds `cap`.
std::uint64_t history_count(const PormdpSpec& spec, int h, std::uint64_t cap = kDefaultHistoryCap);

/// All codes of length-h histories in ascending order.
std::vector<std::uint64_t> enumerate_histories(const PormdpSpec& spec, int h,
                                               std::uint64_t cap = kDefaultHistoryCap);

std::uint64_t encode_history(const PormdpSpec& spec, const std::vector<std::pair<int, int>>& steps);
std::vector<std::pair<int, int>> decode_history(const PormdpSpec& spec, int h, std::uint64_t code);

inline int code_action(const PormdpSpec& spec, std::uint64_t code) {
    return static_cast<int>(code % spec.num_actions);
}
inline int code_state(const PormdpSpec& spec, std::uint64_t code) {
    return static_cast<int>((code / spec.num_actions) % spec.num_states);
}

/// The composed tables f_h(τ[h]) = r_h(s_h, g_h(τ[h]), a_h) for every feedback step.
HistoryRewards compose_rewards(const PormdpSpec& spec, std::uint64_t cap = kDefaultHistoryCap);

/**
 * @brief History-dependent policy.
 *
 * The decision node at step h for history τ[h-1] and current state s has
 * index code(τ[h-1])·S + s; the code of the extended history is node·A + a.
 * Deterministic policies fill `action`; stochastic ones fill `dist` instead.
 */
struct HistoryPolicy {
    std::vector<std::vector<int>> action;                    ///< [h][node], h = 1..H
    std::vector<std::vector<std::vector<double>>> dist;      ///< [h][node] -> probabilities

    bool is_stochastic() const { return !dist.empty(); }
    double prob(int h, std::uint64_t node, int a) const {
        if (is_stochastic()) return dist[h][node][a];
        return action[h][node] == a ? 1.0 : 0.0;
    }
};

/// Deterministic policy playing action 0 everywhere.
HistoryPolicy uniform_action_policy(const PormdpSpec& spec, int a = 0,
                                    std::uint64_t cap = kDefaultHistoryCap);

/// Lifts a time-dependent Markovian rule act[h][s] (h = 1..H) to a history policy.
HistoryPolicy markov_policy(const PormdpSpec& spec, const std::vector<std::vector<int>>& act,
                            std::uint64_t cap = kDefaultHistoryCap);

/// Exact value E[Σ_{h∈H_p} f_h(τ[h])] by forward induction.
double policy_value(const PormdpSpec& spec, const HistoryRewards& f, const HistoryPolicy& pi,
                    std::uint64_t cap = kDefaultHistoryCap);

/// Probability of every length-h history under π, for h = 0..H ([0] = {1}).
std::vector<std::vector<double>> history_occupancy(const PormdpSpec& spec, const HistoryPolicy& pi,
                                                   std::uint64_t cap = kDefaultHistoryCap);

struct PlanResult {
    HistoryPolicy policy;
    double value = 0.0;
};

/**
 * @brief Backward induction over history nodes.
 *
 * `transitions` replaces the PormdpSpec kernel (flat [s][a][s']); `terminal`, when
 * given, adds a reward on every full-length history code. Ties go to the
 * lowest action.
 */
PlanResult backward_induction(const PormdpSpec& spec, const std::vector<double>& transitions,
                              const HistoryRewards& f, const std::vector<double>* terminal = nullptr,
                              std::uint64_t cap = kDefaultHistoryCap);

/// Optimal deterministic history policy for rewards f under the PormdpSpec kernel.
PlanResult optimal_policy(const PormdpSpec& spec, const HistoryRewards& f,
                          std::uint64_t cap = kDefaultHistoryCap);

/// Value of the worst policy (minimizer of policy_value).
double min_policy_value(const PormdpSpec& spec, const HistoryRewards& f,
                        std::uint64_t cap = kDefaultHistoryCap);

struct Episode {
    std::vector<int> states;             ///< s_1..s_H at positions 0..H-1
    std::vector<int> actions;            ///< a_1..a_H at positions 0..H-1
    std::vector<std::uint64_t> codes;    ///< code(τ[h]) at position h, h = 0..H
    std::vector<double> rewards;         ///< composed reward per feedback step
    std::vector<double> feedback;        ///< one draw per feedback step
};

/// Draws a feedback value with mean σ(x) at feedback position k.
double draw_feedback(const PormdpSpec& spec, int k, double x, Rng& rng);

/// Draws one trajectory and its feedback; `f` must be compose_rewards(spec).
Episode simulate_episode(const PormdpSpec& spec, const HistoryRewards& f, const HistoryPolicy& pi,
                         Rng& rng);
Episode simulate_episode(const PormdpSpec& spec, const HistoryPolicy& pi, std::uint64_t rng_seed);

/**
 * @brief Stochastic internal-state generator used only for simulation.
 *
 * w[k][code(τ[h_k])] is a distribution over `num_internal` states and
 * reward[k][(s·U + u)·A + a] the reward given the sampled state.
 */
struct StochasticDecoderSpec {
    int num_internal = 1;
    std::vector<std::vector<std::vector<double>>> w;
    std::vector<std::vector<double>> reward;

    void validate(const PormdpSpec& spec) const;
};

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;   ///< +infinity when n = 1
};

/// Monte-Carlo value of π when internal states are sampled from w.
MonteCarloEstimate monte_carlo_value_w(const PormdpSpec& spec, const StochasticDecoderSpec& w,
                                       const HistoryPolicy& pi, std::uint64_t n, std::uint64_t rng_seed);

/// Behavioural fingerprint: hash of the actions taken on reachable decision nodes.
std::uint64_t policy_id(const PormdpSpec& spec, const HistoryPolicy& pi,
                        std::uint64_t cap = kDefaultHistoryCap);
std::string policy_id_hex(std::uint64_t id);

/**
 * @brief All deterministic history policies, one per reachable behaviour.
 *
 * Decisions on unreachable nodes are fixed to action 0. Throws SizeError if
 * more than `max_policies` behaviours exist.
 */
std::vector<HistoryPolicy> enumerate_deterministic_policies(const PormdpSpec& spec,
                                                            std::uint64_t max_policies = 100'000,
                                                            std::uint64_t cap = kDefaultHistoryCap);

/// All (A^S)^H deterministic time-dependent Markovian policies, as history policies.
std::vector<HistoryPolicy> enumerate_markovian_policies(const PormdpSpec& spec,
                                                        std::uint64_t max_policies = 100'000,
                                                        std::uint64_t cap = kDefaultHistoryCap);

}  // namespace porrl
