#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "porrl/core.hpp"

namespace porrl {

/// Candidate reward functions on length-h histories: values[i][code].
struct FiniteFunctionClass {
    int step = 0;
    std::vector<std::vector<double>> values;

    std::size_t size() const { return values.size(); }
};

/**
 * @brief A spec together with the hypothesis classes learners use on it.
 *
 * `classes[h]` is the candidate class at feedback step h (empty elsewhere);
 * `joint_models[m][h]` picks one candidate per feedback step (-1 elsewhere)
 * and lists the models whose value functions form the Q-class.
 */
struct Environment {
    std::string name;
    PormdpSpec spec;
    HistoryRewards truth;
    std::vector<FiniteFunctionClass> classes;
    std::vector<int> truth_index;
    std::vector<std::vector<int>> joint_models;
    int true_model = 0;

    /// Reward tables of joint model m.
    HistoryRewards model_rewards(int m) const;
    /// Reward tables picking candidate idx[h] at every feedback step h.
    HistoryRewards candidate_rewards(const std::vector<int>& idx) const;
    /// Checks class shapes and that the truth is realized by its indices.
    void validate() const;
};

enum class LockMode { dense, sparse };

/**
 * @brief Combination lock with a single state.
 *
 * Internal states index every action prefix of length 1..H; the last index is
 * the dead state reached once a wrong action is played. A live prefix earns
 * reward q with bernoulli feedback.
 */
PormdpSpec make_combination_lock(int A, int H, double q, const std::vector<int>& combo, LockMode mode);

/**
 * @brief Lock with its decoder-induced classes.
 *
 * F_h holds q·1{prefix = c} for every c in A^h and, when `include_null`, the
 * zero function; joint models are the A^H combinations (plus the zero model).
 */
Environment lock_environment(int A, int H, double q, const std::vector<int>& combo, LockMode mode,
                             bool include_null = true);

/// Builds a spec whose single feedback step H rewards φ(τ)ᵀw, one internal state per distinct value.
PormdpSpec make_linear_reward_env(int S, int A, int H, const std::vector<std::vector<double>>& features,
                                  const std::vector<double>& weights, const std::vector<double>& transitions,
                                  int initial_state = 0, NoiseKind noise = NoiseKind::bernoulli,
                                  double noise_scale = 0.5);

/// Linear env whose class holds φᵀw' for each w' in `candidate_weights` (the truth is added if absent).
Environment linear_environment(int S, int A, int H, const std::vector<std::vector<double>>& features,
                               const std::vector<double>& weights, const std::vector<double>& transitions,
                               std::vector<std::vector<double>> candidate_weights, int initial_state = 0,
                               NoiseKind noise = NoiseKind::bernoulli, double noise_scale = 0.5);

/// Indicator of "play a_2 until s_2 has appeared, then only a_1" over full-length histories.
bool in_trap_set(const PormdpSpec& spec, std::uint64_t code);

/// Two-state, two-action env rewarding the trap indicator at the last step.
PormdpSpec make_markovian_trap(int H);
Environment trap_environment(int H);

struct StochasticFixture {
    PormdpSpec spec;
    StochasticDecoderSpec w;
};

/// S=2, A=2, H=3, U=2 fixture with u_h ~ Ber(0.3); the PormdpSpec carries the exact marginal rewards.
StochasticFixture make_stochastic_internal_env(std::uint64_t seed);

/**
 * @brief Spec realizing arbitrary reward-on-history tables.
 *
 * Copies the shape fields of `shape` and builds a decoder onto the distinct
 * values of `f` with reward r(s,u,a) = value(u).
 */
PormdpSpec spec_from_reward_tables(const PormdpSpec& shape, const HistoryRewards& f);

/// Environment with class {truth, zero} at each feedback step.
Environment environment_from_spec(const PormdpSpec& spec, const std::string& name = "custom");

}  // namespace porrl
