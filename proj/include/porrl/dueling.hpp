#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "porrl/core.hpp"
#include "porrl/envs.hpp"
#include "porrl/estimation.hpp"

namespace porrl {

/// Deterministic history policies deduplicated by behaviour, with their exact occupancies.
struct PolicyUniverse {
    std::vector<HistoryPolicy> policies;
    std::vector<std::uint64_t> ids;
    std::vector<std::vector<std::vector<double>>> occupancy;   ///< [π][h][code] under the PormdpSpec kernel

    std::size_t size() const { return policies.size(); }
};

PolicyUniverse build_policy_universe(const PormdpSpec& spec, std::uint64_t max_policies = 100'000,
                                     std::uint64_t cap = kDefaultHistoryCap);

/// Expected candidate rewards W[h][i][π] = E_π f_{h,i}(τ[h]); rows for steps without feedback are empty.
using CandidateValues = std::vector<std::vector<std::vector<double>>>;

CandidateValues candidate_values(const Environment& env, const PolicyUniverse& universe);

/// Same table with occupancies recomputed under an alternative kernel (flat [s][a][s']).
CandidateValues candidate_values(const Environment& env, const PolicyUniverse& universe,
                                 const std::vector<double>& kernel);

/// f̄_{h,i}(τ₁, τ₂) = f_{h,i}(τ₁) − f_{h,i}(τ₂).
inline double difference_value(const FiniteFunctionClass& cls, std::size_t i, std::uint64_t c1, std::uint64_t c2) {
    return cls.values[i][c1] - cls.values[i][c2];
}

/**
 * @brief Candidate policies Π_t: every policy optimal (within 1e-12) for some
 * surviving model.
 *
 * Surviving models are the kernels in `tables` crossed with the product of the
 * per-step candidate masks. Returns universe indices in ascending order.
 * Throws PorrlError when no kernel survives and SizeError when the product
 * exceeds `max_models`.
 */
std::vector<std::size_t> candidate_set(const std::vector<CandidateValues>& tables,
                                       const std::vector<std::vector<bool>>& masks,
                                       const std::vector<int>& feedback_steps, std::uint64_t max_models = 1'000'000);

/// Spread max_{M,M′} V_D(M, π, π′) − V_D(M′, π, π′) over the surviving models.
double duel_uncertainty(const std::vector<CandidateValues>& tables, const std::vector<std::vector<bool>>& masks,
                        const std::vector<int>& feedback_steps, std::size_t pi, std::size_t pi_prime);

/// Most uncertain pair within the candidates; ties broken lexicographically on (id₁, id₂).
std::pair<std::size_t, std::size_t> most_uncertain_duel(const std::vector<CandidateValues>& tables,
                                                        const std::vector<std::vector<bool>>& masks,
                                                        const std::vector<int>& feedback_steps,
                                                        const std::vector<std::size_t>& candidates,
                                                        const std::vector<std::uint64_t>& ids);

enum class DuelingAlgorithm { confidence, bonus, naive_por_ucrl, naive_por_ucbvi };

std::string to_string(DuelingAlgorithm algo);
/// Throws SpecError on an unknown name.
DuelingAlgorithm parse_dueling_algorithm(const std::string& name);
const std::vector<std::string>& dueling_algorithm_names();

struct DuelingParams {
    double delta = 0.1;
    double bonus_scale = 0.1;
    double zeta_prefix = 2.0;
    Activation activation = Activation::identity;
    NoiseKind noise = NoiseKind::gaussian;
    double noise_scale = 0.5;
    /// Explicit transition candidates (flat [s][a][s']); empty means the kernel is known.
    std::vector<std::vector<double>> transition_candidates;
    std::uint64_t max_policies = 100'000;
    std::uint64_t max_models = 1'000'000;
    std::uint64_t history_cap = kDefaultHistoryCap;

    void validate(const PormdpSpec& spec) const;
};

/// Least-squares fits of the difference class on duel feedback, one per feedback step.
class DuelFit {
public:
    DuelFit(const Environment& env, Activation activation);
    void add(const Episode& first, const Episode& second, const std::vector<double>& feedback);
    const LeastSquaresFit& at(int h) const { return fits_[h]; }
    std::size_t observations() const { return count_; }

private:
    const Environment& env_;
    Activation activation_;
    std::vector<LeastSquaresFit> fits_;
    std::size_t count_ = 0;
};

/// Feedback draws o_h for one duel, with mean σ(f_h(τ₁) − f_h(τ₂)) at every feedback step.
std::vector<double> draw_duel_feedback(const PormdpSpec& spec, const DuelingParams& params, const Episode& first,
                                       const Episode& second, Rng& rng);

struct DuelEntry {
    int round = 0;
    std::uint64_t pi1_id = 0;
    std::uint64_t pi2_id = 0;
    double regret_inc = 0.0;
    double cum_regret = 0.0;
    std::size_t candidate_count = 0;
    int opt_in_candidates = -1;   ///< -1 when the algorithm keeps no candidate set
};

struct DuelLog {
    double optimal_value = 0.0;
    double min_value = 0.0;
    std::vector<DuelEntry> entries;
    std::vector<double> pi1_values;
    std::vector<double> pi2_values;
};

/// Runs T rounds of dueling feedback and records exact dueling regret V⋆ − (V(π₁) + V(π₂))/2.
DuelLog run_dueling(DuelingAlgorithm algo, const Environment& env, const DuelingParams& params, int T,
                    std::uint64_t seed);

}  // namespace porrl
