#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "porrl/core.hpp"
#include "porrl/envs.hpp"
#include "porrl/estimation.hpp"

namespace porrl {

/**
 * @brief Q-function tuples realized by the joint models of an environment.
 *
 * q[m][h][code(τ[h])] is model m's optimal action value at step h under the
 * environment's kernel; vmax[m][h][node] = max_a q[m][h][node·A + a] is the
 * matching state value at decision node `node` of step h.
 */
struct QClass {
    std::vector<std::vector<std::vector<double>>> q;
    std::vector<std::vector<std::vector<double>>> vmax;

    std::size_t size() const { return q.size(); }
};

QClass build_qclass(const Environment& env, std::uint64_t cap = kDefaultHistoryCap);

/// Largest violation of Q_h = f_h·1{h∈H_p} + E[max_a' Q_{h+1}] over every tuple, step and history.
double bellman_residual(const Environment& env, const QClass& qc);

struct CardinalParams {
    double delta = 0.1;
    double bonus_scale = 0.1;
    double zeta_prefix = 2.0;
    double golf_c = 1.0;
    std::uint64_t history_cap = kDefaultHistoryCap;

    void validate() const;
};

enum class CardinalAlgorithm { por_ucrl, por_ucbvi, golf, markovian_ucbvi_baseline, naive_history_ucrl };

std::string to_string(CardinalAlgorithm algo);
/// Throws SpecError on an unknown name.
CardinalAlgorithm parse_cardinal_algorithm(const std::string& name);
const std::vector<std::string>& cardinal_algorithm_names();

/// Flag value for "this algorithm keeps no such confidence set".
inline constexpr int kFlagNotApplicable = -1;

/// Policy chosen for one episode with its diagnostics.
struct EpisodePlan {
    HistoryPolicy policy;
    double optimistic_value = 0.0;
    int truth_in_cf = kFlagNotApplicable;
    int truth_in_cp = kFlagNotApplicable;
};

/**
 * @brief Extended value iteration over history nodes.
 *
 * At each (τ[h-1], s, a) the next-state distribution is chosen inside the L1
 * ball of radius radii[s·A + a] around phat(·|s,a) so as to maximize the
 * continuation value.
 */
PlanResult extended_value_iteration(const PormdpSpec& spec, const std::vector<double>& phat,
                                    const std::vector<double>& radii, const HistoryRewards& r_tilde,
                                    std::uint64_t cap = kDefaultHistoryCap);

/// Distribution in the L1 ball of radius `radius` around `row` maximizing Σ p·values.
std::vector<double> optimistic_row(const std::vector<double>& row, const std::vector<double>& values, double radius);

/// Online learner interface: plan an episode, then absorb its outcome.
class CardinalLearner {
public:
    virtual ~CardinalLearner() = default;
    /// Plan for episode t (1-based); data from episodes 1..t-1 has been absorbed.
    virtual EpisodePlan plan(int t) = 0;
    virtual void update(const Episode& ep) = 0;
};

/// Confidence-set optimism: per-history optimistic rewards plus extended value iteration.
class PorUcrl : public CardinalLearner {
public:
    PorUcrl(const Environment& env, const CardinalParams& params, int planned_episodes);
    EpisodePlan plan(int t) override;
    void update(const Episode& ep) override;

    const RewardFitState& fits() const { return fits_; }
    const TransitionFitState& transitions() const { return trans_; }
    /// Confidence masks used for the most recent plan, indexed by step.
    const std::vector<std::vector<bool>>& masks() const { return masks_; }

private:
    const Environment& env_;
    CardinalParams params_;
    ConfidenceParams conf_;
    RewardFitState fits_;
    TransitionFitState trans_;
    std::vector<std::vector<bool>> masks_;
};

/// Bonus optimism: least-squares rewards plus spread and transition bonuses.
class PorUcbvi : public CardinalLearner {
public:
    PorUcbvi(const Environment& env, const CardinalParams& params, int planned_episodes);
    EpisodePlan plan(int t) override;
    void update(const Episode& ep) override;

    /// Terminal bonus z(Bp)·min(4, Σ_{h<H} ξ(s_h, a_h)) on every full-length history at episode t.
    std::vector<double> transition_bonus_table(int t) const;

private:
    const Environment& env_;
    CardinalParams params_;
    ConfidenceParams conf_;
    RewardFitState fits_;
    TransitionFitState trans_;
};

/// Squared Bellman losses L_h(g, m) of candidate Q_h^g against targets from tuple m.
struct GolfLosses {
    int horizon = 0;
    std::size_t num_tuples = 0;
    std::vector<std::vector<double>> loss;   ///< [h][g·M + m]

    double at(int h, std::size_t g, std::size_t m) const { return loss[h][g * num_tuples + m]; }
};

/// Tuples whose loss at every step is within β of the best auxiliary candidate.
std::vector<bool> golf_confidence_set(const GolfLosses& losses, double beta);

/// Action maximizing the largest surviving Q at decision node `node` of step h; lowest action on ties.
int golf_act(const std::vector<bool>& mask, const QClass& qc, int h, std::uint64_t node, int num_actions);

/// Global optimism over the realizable Q-class with a Bellman-loss confidence set.
class Golf : public CardinalLearner {
public:
    Golf(const Environment& env, const CardinalParams& params, int planned_episodes);
    EpisodePlan plan(int t) override;
    void update(const Episode& ep) override;

    const QClass& qclass() const { return qc_; }
    const GolfLosses& losses() const { return losses_; }
    double beta() const { return beta_; }

private:
    const Environment& env_;
    CardinalParams params_;
    QClass qc_;
    GolfLosses losses_;
    double beta_;
    bool warned_empty_ = false;
};

/// Time-dependent Markovian UCBVI that ignores the history beyond the current state.
class MarkovianUcbvi : public CardinalLearner {
public:
    MarkovianUcbvi(const Environment& env, const CardinalParams& params, int planned_episodes);
    EpisodePlan plan(int t) override;
    void update(const Episode& ep) override;

private:
    const Environment& env_;
    CardinalParams params_;
    int planned_;
    std::vector<std::uint64_t> count_;     ///< [h][s][a]
    std::vector<double> feedback_sum_;     ///< [h][s][a]
    TransitionFitState trans_;
};

/// Tabular optimism treating every history node as a separate state.
class NaiveHistoryUcrl : public CardinalLearner {
public:
    NaiveHistoryUcrl(const Environment& env, const CardinalParams& params, int planned_episodes);
    EpisodePlan plan(int t) override;
    void update(const Episode& ep) override;

private:
    const Environment& env_;
    CardinalParams params_;
    std::uint64_t node_count_ = 0;
    std::vector<std::vector<std::uint64_t>> visits_;        ///< [h][code]
    std::vector<std::vector<double>> feedback_sum_;         ///< [h][code]
    std::vector<std::vector<std::uint64_t>> successors_;    ///< [h][code·S + s'], h < H
};

std::unique_ptr<CardinalLearner> make_cardinal_learner(CardinalAlgorithm algo, const Environment& env,
                                                       const CardinalParams& params, int planned_episodes);

struct RegretEntry {
    int episode = 0;
    std::uint64_t policy_id = 0;
    double value = 0.0;
    double regret_inc = 0.0;
    double cum_regret = 0.0;
    double optimistic_value = 0.0;
    int truth_in_cf = kFlagNotApplicable;
    int truth_in_cp = kFlagNotApplicable;
};

struct RegretLog {
    double optimal_value = 0.0;
    std::vector<RegretEntry> entries;
    std::vector<HistoryPolicy> policies;   ///< filled only when requested
};

/// Runs T episodes of `algo` on `env` and records exact per-episode regret.
RegretLog run_cardinal(CardinalAlgorithm algo, const Environment& env, const CardinalParams& params, int T,
                       std::uint64_t seed, bool store_policies = false);

struct PacSample {
    std::size_t index = 0;
    HistoryPolicy policy;
    double gap = 0.0;
};

/// Episode index (0-based) drawn uniformly from T episodes by the PAC conversion for `seed`.
std::size_t pac_sample_index(std::size_t T, std::uint64_t seed);

/// Uniformly samples one played policy and computes its exact suboptimality gap.
PacSample regret_to_pac(const RegretLog& log, const PormdpSpec& spec, const HistoryRewards& truth,
                        std::uint64_t seed);

/// R/T + 8·B·p·sqrt(ln(1/δ)/T).
double pac_gap_bound(double cumulative_regret, int T, double reward_bound, int p, double delta);

}  // namespace porrl
