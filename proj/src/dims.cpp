#include "porrl/dims.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace porrl {

namespace {

/**
 * Independence test at one scale: a pair p is still unspent while its running
 * squared gap stays within the sum threshold, and a point x uses it when
 * |gap| clears the gap threshold. Scales strictly inside (b_prev, b) between
 * two consecutive gap values are represented by (|gap| ≥ b, Σ < b²).
 */
struct Scale {
    double gap;
    bool gap_inclusive;   // |d| ≥ gap instead of |d| > gap
    double sum;
    bool sum_strict;      // Σ < sum instead of Σ ≤ sum

    bool gap_ok(double d) const { return gap_inclusive ? d >= gap : d > gap; }
    bool sum_ok(double a) const { return sum_strict ? a < sum : a <= sum; }
};

/// Memoized longest-sequence search over a reduced gap matrix gaps[x][pair].
class EluderSearch {
public:
    EluderSearch(const std::vector<std::vector<double>>& gaps, Scale scale, std::uint64_t budget)
        : gaps_(gaps), scale_(scale), budget_(budget) {}

    std::vector<std::size_t> run() {
        const std::size_t pairs = gaps_.empty() ? 0 : gaps_[0].size();
        std::vector<double> accum(pairs, 0.0);
        solve(0, accum);
        std::vector<std::size_t> seq;
        std::uint64_t set = 0;
        for (;;) {
            auto it = memo_.find(set);
            if (it == memo_.end() || it->second.next < 0) break;
            seq.push_back(static_cast<std::size_t>(it->second.next));
            set |= std::uint64_t{1} << it->second.next;
        }
        return seq;
    }

    bool exceeded() const { return exceeded_; }
    std::uint64_t expansions() const { return expansions_; }

private:
    struct Entry {
        int length;
        int next;
    };

    int solve(std::uint64_t set, const std::vector<double>& accum) {
        if (auto it = memo_.find(set); it != memo_.end()) return it->second.length;
        if (++expansions_ > budget_) {
            exceeded_ = true;
            return 0;
        }
        const std::size_t n = gaps_.size();
        // Each step spends at least one unspent pair, which bounds the remaining depth.
        int alive = 0;
        for (double a : accum) alive += scale_.sum_ok(a);
        int remaining = 0;
        for (std::size_t x = 0; x < n; ++x) remaining += !(set >> x & 1);
        const int bound = std::min(alive, remaining);
        Entry best{0, -1};
        std::vector<double> next(accum.size());
        for (std::size_t x = 0; x < n && best.length < bound; ++x) {
            if (set >> x & 1) continue;
            bool independent = false;
            for (std::size_t p = 0; p < accum.size() && !independent; ++p)
                independent = scale_.sum_ok(accum[p]) && scale_.gap_ok(gaps_[x][p]);
            if (!independent) continue;
            for (std::size_t p = 0; p < accum.size(); ++p) next[p] = accum[p] + gaps_[x][p] * gaps_[x][p];
            const int len = 1 + solve(set | (std::uint64_t{1} << x), next);
            if (len > best.length) best = {len, static_cast<int>(x)};
        }
        memo_[set] = best;
        return best.length;
    }

    const std::vector<std::vector<double>>& gaps_;
    Scale scale_;
    std::uint64_t budget_;
    std::uint64_t expansions_ = 0;
    bool exceeded_ = false;
    std::unordered_map<std::uint64_t, Entry> memo_;
};

/// Longest sequence at one scale, after dropping points that can never be used.
std::vector<std::size_t> search_at(const std::vector<std::vector<double>>& all_gaps, Scale scale,
                                   std::uint64_t budget, DimResult& stats) {
    std::vector<std::vector<double>> gaps;
    std::vector<std::size_t> index;
    for (std::size_t x = 0; x < all_gaps.size(); ++x) {
        const auto& g = all_gaps[x];
        // A point with no usable gap is never independent; a point with the same
        // gap vector as an earlier one can never follow it.
        if (std::none_of(g.begin(), g.end(), [&](double d) { return scale.gap_ok(d); })) continue;
        if (std::find(gaps.begin(), gaps.end(), g) != gaps.end()) continue;
        gaps.push_back(g);
        index.push_back(x);
    }
    if (gaps.size() > 64) throw SizeError("too many distinct points for the exact eluder search (max 64)");
    EluderSearch search(gaps, scale, budget > stats.expansions ? budget - stats.expansions : 0);
    auto seq = search.run();
    for (auto& x : seq) x = index[x];
    stats.expansions += search.expansions();
    stats.budget_exceeded = stats.budget_exceeded || search.exceeded();
    return seq;
}

}  // namespace

DimResult eluder_dim_matrix(const std::vector<std::vector<double>>& values, double epsilon, std::uint64_t budget) {
    if (!(epsilon > 0.0)) throw SpecError("epsilon must be positive");
    const std::size_t F = values.empty() ? 0 : values[0].size();
    for (const auto& row : values)
        if (row.size() != F) throw SpecError("every point needs one value per function");
    // Absolute gaps over unordered function pairs.
    std::vector<std::vector<double>> gaps(values.size());
    std::vector<double> levels;
    for (std::size_t x = 0; x < values.size(); ++x)
        for (std::size_t j = 0; j < F; ++j)
            for (std::size_t k = j + 1; k < F; ++k) {
                gaps[x].push_back(std::abs(values[x][j] - values[x][k]));
                if (gaps[x].back() > epsilon) levels.push_back(gaps[x].back());
            }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    DimResult out;
    out.scale = epsilon;
    out.witness = search_at(gaps, Scale{epsilon, false, epsilon * epsilon, false}, budget, out);
    // Larger scales ε′ ∈ (b_prev, b) for every gap level b above ε.
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double b = levels[i];
        if (static_cast<int>(out.witness.size()) >= static_cast<int>(values.size())) break;
        auto seq = search_at(gaps, Scale{b, true, b * b, true}, budget, out);
        if (seq.size() <= out.witness.size()) continue;
        // A concrete scale for the witness: above every spent prefix sum and the next lower level.
        double lower = std::max(epsilon, i > 0 ? levels[i - 1] : 0.0);
        std::vector<double> accum(gaps.empty() ? 0 : gaps[0].size(), 0.0);
        for (std::size_t x : seq)
            for (std::size_t p = 0; p < accum.size(); ++p) {
                if (accum[p] < b * b) lower = std::max(lower, std::sqrt(accum[p]));
                accum[p] += gaps[x][p] * gaps[x][p];
            }
        out.witness = std::move(seq);
        out.scale = 0.5 * (lower + b);
    }
    out.dimension = static_cast<int>(out.witness.size());
    return out;
}

DimResult eluder_dim(const FiniteFunctionClass& cls, double epsilon, std::uint64_t budget) {
    if (cls.size() == 0) throw SpecError("eluder dimension needs a nonempty class");
    const std::size_t n = cls.values[0].size();
    std::vector<std::vector<double>> values(n, std::vector<double>(cls.size()));
    for (std::size_t j = 0; j < cls.size(); ++j) {
        if (cls.values[j].size() != n) throw SpecError("class members disagree on the domain size");
        for (std::size_t x = 0; x < n; ++x) values[x][j] = cls.values[j][x];
    }
    return eluder_dim_matrix(values, epsilon, budget);
}

void FiniteDimQuery::validate() const {
    if (!(epsilon > 0.0)) throw SpecError("epsilon must be positive");
    if (functions.empty()) throw SpecError("query needs at least one function");
    const std::size_t n = functions[0].size();
    for (const auto& f : functions)
        if (f.size() != n) throw SpecError("functions disagree on the domain size");
    for (const auto& mu : distributions) {
        if (mu.size() != n) throw SpecError("distribution does not match the domain size");
        double sum = 0.0;
        for (double p : mu) {
            if (p < 0.0) throw SpecError("distribution has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw SpecError("distribution does not sum to 1");
    }
}

DimResult dist_eluder_dim(const FiniteDimQuery& query, std::uint64_t budget) {
    query.validate();
    std::vector<std::vector<double>> values(query.distributions.size(),
                                            std::vector<double>(query.functions.size(), 0.0));
    for (std::size_t i = 0; i < query.distributions.size(); ++i)
        for (std::size_t j = 0; j < query.functions.size(); ++j)
            for (std::size_t x = 0; x < query.functions[j].size(); ++x)
                values[i][j] += query.distributions[i][x] * query.functions[j][x];
    return eluder_dim_matrix(values, query.epsilon, budget);
}

std::vector<std::vector<double>> bellman_errors(const Environment& env, const QClass& qc, int h) {
    const auto& spec = env.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    if (h < 1 || h > H) throw SpecError("step out of range");
    const bool feedback = spec.is_feedback_step(h);
    std::vector<std::vector<double>> out(qc.size());
    for (std::size_t m = 0; m < qc.size(); ++m) {
        const auto& q = qc.q[m][h];
        out[m].resize(q.size());
        for (std::uint64_t code = 0; code < q.size(); ++code) {
            const int s = code_state(spec, code), a = code_action(spec, code);
            double target = feedback ? env.truth[h][code] : 0.0;
            if (h < H)
                for (int s2 = 0; s2 < S; ++s2) {
                    double next = -std::numeric_limits<double>::infinity();
                    for (int a2 = 0; a2 < A; ++a2) next = std::max(next, qc.q[m][h + 1][(code * S + s2) * A + a2]);
                    target += spec.P(s, a, s2) * next;
                }
            out[m][code] = q[code] - target;
        }
    }
    return out;
}

std::vector<std::vector<double>> greedy_occupancy(const Environment& env, const QClass& qc, std::size_t m) {
    const auto& spec = env.spec;
    const int A = spec.num_actions;
    HistoryPolicy pi;
    pi.action.resize(spec.horizon + 1);
    for (int h = 1; h <= spec.horizon; ++h) {
        const auto& q = qc.q[m][h];
        pi.action[h].resize(q.size() / A);
        for (std::size_t node = 0; node < pi.action[h].size(); ++node) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (q[node * A + a] > q[node * A + best]) best = a;
            pi.action[h][node] = best;
        }
    }
    return history_occupancy(spec, pi);
}

namespace {

HorizonDims horizon_dims(const Environment& env, const QClass& qc, double alpha, bool gated, double epsilon,
                         std::uint64_t budget) {
    if (!(epsilon > 0.0)) throw SpecError("epsilon must be positive");
    if (gated && !(alpha >= 0.0)) throw SpecError("alpha must be nonnegative");
    const int H = env.spec.horizon;
    const std::size_t M = qc.size();
    std::vector<std::vector<std::vector<double>>> occ(M);
    for (std::size_t m = 0; m < M; ++m) occ[m] = greedy_occupancy(env, qc, m);
    std::vector<std::vector<std::vector<double>>> phi(H + 1);
    for (int h = 1; h <= H; ++h) phi[h] = bellman_errors(env, qc, h);

    HorizonDims out;
    out.per_h.resize(H + 1);
    out.members.resize(H + 1);
    std::vector<bool> alive(M, true);   // members of Q(α, h−1)
    for (int h = 1; h <= H; ++h) {
        out.members[h] = alive;
        FiniteDimQuery query;
        query.epsilon = epsilon;
        for (std::size_t m = 0; m < M; ++m) {
            if (!alive[m]) continue;
            query.functions.push_back(phi[h][m]);
            query.distributions.push_back(occ[m][h]);
        }
        DimResult r = query.functions.empty() ? DimResult{} : dist_eluder_dim(query, budget);
        // Report witnesses as tuple indices rather than positions among the members.
        std::vector<std::size_t> members;
        for (std::size_t m = 0; m < M; ++m)
            if (alive[m]) members.push_back(m);
        for (auto& w : r.witness) w = members[w];
        out.max = std::max(out.max, r.dimension);
        out.budget_exceeded = out.budget_exceeded || r.budget_exceeded;
        out.per_h[h] = std::move(r);
        if (!gated) continue;
        for (std::size_t m = 0; m < M; ++m) {
            if (!alive[m]) continue;
            double e = 0.0;
            for (std::size_t c = 0; c < phi[h][m].size(); ++c) e += occ[m][h][c] * phi[h][m][c];
            alive[m] = std::abs(e) <= alpha;
        }
    }
    return out;
}

}  // namespace

HorizonDims habe_dim(const Environment& env, const QClass& qc, double alpha, double epsilon, std::uint64_t budget) {
    return horizon_dims(env, qc, alpha, true, epsilon, budget);
}

HorizonDims be_dim(const Environment& env, const QClass& qc, double epsilon, std::uint64_t budget) {
    return horizon_dims(env, qc, 0.0, false, epsilon, budget);
}

double default_dims_epsilon(double alpha, int T) {
    if (T < 1) throw SpecError("T must be positive");
    return std::min(alpha, std::sqrt(1.0 / T));
}

FiniteFunctionClass difference_class(const FiniteFunctionClass& cls, std::size_t max_domain) {
    if (cls.size() == 0) throw SpecError("difference class needs a nonempty class");
    const std::size_t n = cls.values[0].size();
    if (n * n > max_domain) throw SizeError("paired domain exceeds the size cap");
    FiniteFunctionClass out;
    out.step = cls.step;
    out.values.resize(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) {
        if (cls.values[i].size() != n) throw SpecError("class members disagree on the domain size");
        out.values[i].resize(n * n);
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y) out.values[i][x * n + y] = cls.values[i][x] - cls.values[i][y];
    }
    return out;
}

}  // namespace porrl
