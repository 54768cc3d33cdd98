#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "porrl/cardinal.hpp"
#include "porrl/envs.hpp"

namespace porrl {

inline constexpr std::uint64_t kDefaultDimBudget = 10'000'000;

/// Longest ε-independent sequence found by the search.
struct DimResult {
    int dimension = 0;
    std::vector<std::size_t> witness;   ///< point (or distribution) indices in sequence order
    double scale = 0.0;                 ///< scale ε′ ≥ ε at which every witness step is ε′-independent
    bool budget_exceeded = false;       ///< when set, `dimension` is a certified lower bound
    std::uint64_t expansions = 0;
};

/**
 * @brief Exact eluder dimension of a finite function matrix.
 *
 * values[x][j] is function j evaluated at point x. A point x is ε-independent
 * of a prefix when some pair (j, k) has Σ_prefix (v_j − v_k)² ≤ ε² and
 * |v_j(x) − v_k(x)| > ε. The dimension is the longest sequence that is
 * ε′-independent element by element for a single scale ε′ ≥ ε, which makes
 * it nonincreasing in ε. Each scale is searched exactly by memoized
 * depth-first search over point subsets.
 */
DimResult eluder_dim_matrix(const std::vector<std::vector<double>>& values, double epsilon,
                            std::uint64_t budget = kDefaultDimBudget);

/// Eluder dimension of a class over its history domain; witnesses are history codes.
DimResult eluder_dim(const FiniteFunctionClass& cls, double epsilon, std::uint64_t budget = kDefaultDimBudget);

/// Functions and distributions over a shared finite domain.
struct FiniteDimQuery {
    std::vector<std::vector<double>> functions;       ///< [f][x]
    std::vector<std::vector<double>> distributions;   ///< [μ][x]
    double epsilon = 0.0;

    void validate() const;
};

/// Distributional eluder dimension: points are distributions, gaps are |E_μ[f − f′]|.
DimResult dist_eluder_dim(const FiniteDimQuery& query, std::uint64_t budget = kDefaultDimBudget);

/// Bellman errors Q_h^m − T_h Q_{h+1}^m under the true model, indexed [m][code(τ[h])].
std::vector<std::vector<double>> bellman_errors(const Environment& env, const QClass& qc, int h);

/// Exact occupancy [h][code] of the greedy policy of tuple m under the true kernel.
std::vector<std::vector<double>> greedy_occupancy(const Environment& env, const QClass& qc, std::size_t m);

struct HorizonDims {
    std::vector<DimResult> per_h;               ///< index h = 1..H; [0] unused
    std::vector<std::vector<bool>> members;     ///< [h] tuples whose errors/distributions entered step h
    int max = 0;
    bool budget_exceeded = false;
};

/// α-gated dimension: max_h dim_DE over Bellman errors and greedy occupancies of tuples passing the gate.
HorizonDims habe_dim(const Environment& env, const QClass& qc, double alpha, double epsilon,
                     std::uint64_t budget = kDefaultDimBudget);

/// Ungated Bellman-eluder dimension over every tuple.
HorizonDims be_dim(const Environment& env, const QClass& qc, double epsilon, std::uint64_t budget = kDefaultDimBudget);

/// min(α, √(1/T)).
double default_dims_epsilon(double alpha, int T);

/// Pair class F̄(x, y) = f(x) − f(y) over the domain of pairs, indexed x·n + y.
FiniteFunctionClass difference_class(const FiniteFunctionClass& cls, std::size_t max_domain = 4096);

}  // namespace porrl
