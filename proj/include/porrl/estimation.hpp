#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "porrl/core.hpp"
#include "porrl/envs.hpp"

namespace porrl {

/// Constants shared by every confidence radius and bonus.
struct ConfidenceParams {
    double delta = 0.1;
    double eta = 0.5;             ///< sub-gaussian noise scale of the feedback
    double reward_bound = 1.0;    ///< B
    int planned_episodes = 1;     ///< T
    int horizon = 1;              ///< H
    double zeta_prefix = 2.0;
    double bonus_scale = 0.1;

    void validate() const;
};

/**
 * @brief Least-squares state for one finite class at one step.
 *
 * Candidates are compared through their activated predictions. The loss of
 * every candidate and the squared distance between every pair of candidates
 * over the observed data are maintained incrementally.
 */
class LeastSquaresFit {
public:
    LeastSquaresFit() = default;
    explicit LeastSquaresFit(std::size_t num_candidates);

    /// Records feedback `o` at data point `key`, where predictions[i] is candidate i's activated value.
    void add(std::uint64_t key, const std::vector<double>& predictions, double o);

    std::size_t size() const { return loss_.size(); }
    std::size_t num_observations() const { return keys_.size(); }
    /// Minimizer of the cached loss; ties go to the lowest index.
    std::size_t best() const { return best_; }
    const std::vector<double>& losses() const { return loss_; }
    /// Σ over observations of (prediction_i − prediction_j)².
    double distance(std::size_t i, std::size_t j) const { return dist_[i * loss_.size() + j]; }
    const std::vector<std::uint64_t>& keys() const { return keys_; }
    const std::vector<double>& observations() const { return obs_; }

private:
    std::vector<double> loss_;
    std::vector<double> dist_;
    std::vector<std::uint64_t> keys_;
    std::vector<double> obs_;
    std::size_t best_ = 0;
};

/// Per-step least-squares fits; entries for steps without feedback are empty.
struct RewardFitState {
    std::vector<LeastSquaresFit> by_step;
};

/// Activated predictions of every candidate at one history code.
std::vector<double> class_predictions(const FiniteFunctionClass& cls, std::uint64_t code, Activation act);

/// Batch least squares over (code, feedback) pairs; ties go to the lowest index.
std::size_t least_squares_fit(const FiniteFunctionClass& cls,
                              const std::vector<std::pair<std::uint64_t, double>>& data, Activation act);

/// β̄(δ/(2t²H)) scaled by bonus_scale, for a class of size N after t episodes.
double beta_threshold(int t, std::size_t class_size, const ConfidenceParams& params);
/// As beta_threshold with an explicit confidence level in place of params.delta.
double beta_threshold(int t, std::size_t class_size, const ConfidenceParams& params, double delta);

/// Candidates whose squared activated distance to the fit is at most β.
std::vector<bool> confidence_set_F(const LeastSquaresFit& fit, double beta);

/// Spread max − min of the masked candidates at one history. Throws on an empty mask.
double reward_bonus_gamma(const FiniteFunctionClass& cls, const std::vector<bool>& mask, std::uint64_t code);

/// L1 radius min(2, scale·prefix·sqrt((S ln2 + ln(n(n+1)SA/δ))/(2n))); 2 when n = 0.
double l1_radius(std::uint64_t n, double delta, int S, int A, double zeta_prefix, double bonus_scale = 1.0);

/// Transition bonus min(2, scale·4·sqrt((H ln(6HSA) + S ln(8t²H²) + ln(32t²n/δ))/(2n))); 2 when n = 0.
double transition_bonus_xi(std::uint64_t n, int t, double delta, int S, int A, int H, double bonus_scale = 1.0);

/// Change-of-measure factor max(D, 2D·sqrt(ln max(D, e))) scaled by bonus_scale.
double z_of(double D, double bonus_scale = 1.0);

/// Empirical transition counts and the maximum-likelihood kernel.
class TransitionFitState {
public:
    TransitionFitState(int S, int A);

    void add(int s, int a, int s_next);
    std::uint64_t count(int s, int a) const { return n_sa_[static_cast<std::size_t>(s) * A_ + a]; }
    std::uint64_t count(int s, int a, int s_next) const {
        return n_sas_[(static_cast<std::size_t>(s) * A_ + a) * S_ + s_next];
    }
    /// Flat [s][a][s'] estimate; uniform rows where nothing was observed.
    std::vector<double> estimate() const;
    /// L1 distance between a kernel row and the estimate at (s, a).
    double l1_distance(const std::vector<double>& kernel, int s, int a) const;
    int num_states() const { return S_; }
    int num_actions() const { return A_; }

private:
    int S_, A_;
    std::vector<std::uint64_t> n_sa_;
    std::vector<std::uint64_t> n_sas_;
};

}  // namespace porrl
