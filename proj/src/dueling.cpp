#include "porrl/dueling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace porrl {

namespace {

constexpr double kArgmaxTolerance = 1e-12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

CandidateValues values_from_occupancy(const Environment& env,
                                      const std::vector<std::vector<std::vector<double>>>& occupancy) {
    const auto& spec = env.spec;
    CandidateValues W(spec.horizon + 1);
    for (int h : spec.feedback_steps) {
        const auto& cls = env.classes[h];
        W[h].assign(cls.size(), std::vector<double>(occupancy.size(), 0.0));
        for (std::size_t i = 0; i < cls.size(); ++i)
            for (std::size_t p = 0; p < occupancy.size(); ++p) W[h][i][p] = dot(occupancy[p][h], cls.values[i]);
    }
    return W;
}

/// Per-step matrices over code pairs, flattened [c1·n + c2].
using PairTables = std::vector<std::vector<double>>;

/// Σ_h E_{τ₁∼π, τ₂∼π′} R_h(τ₁[h], τ₂[h]) for every ordered pair of universe policies, flattened [π·N + π′].
std::vector<double> pair_expectations(const PormdpSpec& spec, const PolicyUniverse& U, const PairTables& R) {
    const std::size_t N = U.size();
    std::vector<double> out(N * N, 0.0);
    for (int h : spec.feedback_steps) {
        const std::size_t n = R[h].size() == 0 ? 0 : static_cast<std::size_t>(std::llround(std::sqrt(R[h].size())));
        std::vector<std::vector<double>> left(N, std::vector<double>(n, 0.0));
        for (std::size_t p = 0; p < N; ++p) {
            const auto& occ = U.occupancy[p][h];
            for (std::size_t c1 = 0; c1 < n; ++c1) {
                if (occ[c1] == 0.0) continue;
                for (std::size_t c2 = 0; c2 < n; ++c2) left[p][c2] += occ[c1] * R[h][c1 * n + c2];
            }
        }
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = 0; q < N; ++q) out[p * N + q] += dot(left[p], U.occupancy[q][h]);
    }
    return out;
}

/// Spread γ̄ of the difference class over a mask at every code pair.
std::vector<double> difference_spread(const FiniteFunctionClass& cls, const std::vector<bool>& mask) {
    const std::size_t n = cls.values[0].size();
    std::vector<double> out(n * n);
    for (std::size_t c1 = 0; c1 < n; ++c1)
        for (std::size_t c2 = 0; c2 < n; ++c2) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < cls.size(); ++i) {
                if (!mask[i]) continue;
                const double d = difference_value(cls, i, c1, c2);
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
            out[c1 * n + c2] = hi - lo;
        }
    return out;
}

}  // namespace

PolicyUniverse build_policy_universe(const PormdpSpec& spec, std::uint64_t max_policies, std::uint64_t cap) {
    auto all = enumerate_deterministic_policies(spec, max_policies, cap);
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    order.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) order.emplace_back(policy_id(spec, all[i], cap), i);
    std::sort(order.begin(), order.end());
    PolicyUniverse U;
    for (const auto& [id, i] : order) {
        if (!U.ids.empty() && U.ids.back() == id) continue;
        U.ids.push_back(id);
        U.occupancy.push_back(history_occupancy(spec, all[i], cap));
        U.policies.push_back(std::move(all[i]));
    }
    return U;
}

CandidateValues candidate_values(const Environment& env, const PolicyUniverse& universe) {
    return values_from_occupancy(env, universe.occupancy);
}

CandidateValues candidate_values(const Environment& env, const PolicyUniverse& universe,
                                 const std::vector<double>& kernel) {
    PormdpSpec alt = env.spec;
    alt.transitions = kernel;
    alt.validate();
    std::vector<std::vector<std::vector<double>>> occ;
    occ.reserve(universe.size());
    for (const auto& pi : universe.policies) occ.push_back(history_occupancy(alt, pi));
    return values_from_occupancy(env, occ);
}

std::vector<std::size_t> candidate_set(const std::vector<CandidateValues>& tables,
                                       const std::vector<std::vector<bool>>& masks,
                                       const std::vector<int>& feedback_steps, std::uint64_t max_models) {
    if (tables.empty()) throw PorrlError("empty confidence set: no transition candidate survives");
    std::vector<std::vector<std::size_t>> members;
    double product = 1.0;
    for (int h : feedback_steps) {
        members.emplace_back();
        for (std::size_t i = 0; i < masks[h].size(); ++i)
            if (masks[h][i]) members.back().push_back(i);
        if (members.back().empty()) throw PorrlError("empty confidence set at a feedback step");
        product *= static_cast<double>(members.back().size());
    }
    if (product * tables.size() > static_cast<double>(max_models))
        throw SizeError("too many surviving models to enumerate candidate policies");
    const std::size_t N = tables[0][feedback_steps.front()][0].size();
    std::vector<bool> chosen(N, false);
    std::vector<double> value(N);
    for (const auto& W : tables) {
        std::vector<std::size_t> digit(members.size(), 0);
        for (;;) {
            std::fill(value.begin(), value.end(), 0.0);
            for (std::size_t k = 0; k < members.size(); ++k) {
                const auto& row = W[feedback_steps[k]][members[k][digit[k]]];
                for (std::size_t p = 0; p < N; ++p) value[p] += row[p];
            }
            const double best = *std::max_element(value.begin(), value.end());
            for (std::size_t p = 0; p < N; ++p)
                if (value[p] >= best - kArgmaxTolerance) chosen[p] = true;
            std::size_t k = 0;
            while (k < digit.size() && ++digit[k] == members[k].size()) digit[k++] = 0;
            if (k == digit.size()) break;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < N; ++p)
        if (chosen[p]) out.push_back(p);
    return out;
}

double duel_uncertainty(const std::vector<CandidateValues>& tables, const std::vector<std::vector<bool>>& masks,
                        const std::vector<int>& feedback_steps, std::size_t pi, std::size_t pi_prime) {
    // Models are products over steps, so per-step extremes add up within each kernel.
    double hi = -std::numeric_limits<double>::infinity(), lo = -hi;
    for (const auto& W : tables) {
        double top = 0.0, bottom = 0.0;
        for (int h : feedback_steps) {
            double mx = -std::numeric_limits<double>::infinity(), mn = -mx;
            for (std::size_t i = 0; i < masks[h].size(); ++i) {
                if (!masks[h][i]) continue;
                const double d = W[h][i][pi] - W[h][i][pi_prime];
                mx = std::max(mx, d);
                mn = std::min(mn, d);
            }
            top += mx;
            bottom += mn;
        }
        hi = std::max(hi, top);
        lo = std::min(lo, bottom);
    }
    return hi - lo;
}

std::pair<std::size_t, std::size_t> most_uncertain_duel(const std::vector<CandidateValues>& tables,
                                                        const std::vector<std::vector<bool>>& masks,
                                                        const std::vector<int>& feedback_steps,
                                                        const std::vector<std::size_t>& candidates,
                                                        const std::vector<std::uint64_t>& ids) {
    if (candidates.empty()) throw PorrlError("no candidate policies to duel");
    auto sorted = candidates;
    std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    std::pair<std::size_t, std::size_t> best{sorted[0], sorted[0]};
    double best_u = -1.0;
    for (std::size_t a : sorted)
        for (std::size_t b : sorted) {
            const double u = duel_uncertainty(tables, masks, feedback_steps, a, b);
            if (u > best_u) {
                best_u = u;
                best = {a, b};
            }
        }
    return best;
}

const std::vector<std::string>& dueling_algorithm_names() {
    static const std::vector<std::string> names{"dueling_confidence", "dueling_bonus", "naive_reduction_por_ucrl",
                                                "naive_reduction_por_ucbvi"};
    return names;
}

std::string to_string(DuelingAlgorithm algo) { return dueling_algorithm_names()[static_cast<int>(algo)]; }

DuelingAlgorithm parse_dueling_algorithm(const std::string& name) {
    const auto& names = dueling_algorithm_names();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SpecError("unknown dueling algorithm '" + name + "'");
    return static_cast<DuelingAlgorithm>(it - names.begin());
}

void DuelingParams::validate(const PormdpSpec& spec) const {
    if (!(delta > 0.0 && delta < 1.0)) throw SpecError("delta must lie in (0, 1)");
    if (!(bonus_scale > 0.0)) throw SpecError("bonus_scale must be positive");
    if (!(zeta_prefix > 0.0)) throw SpecError("zeta_prefix must be positive");
    if (noise == NoiseKind::gaussian && !(noise_scale > 0.0)) throw SpecError("duel noise scale must be positive");
    if (noise == NoiseKind::bernoulli && activation != Activation::logistic)
        throw SpecError("Bernoulli duel feedback needs the logistic activation (reward differences can be negative)");
    const std::size_t shape = static_cast<std::size_t>(spec.num_states) * spec.num_actions * spec.num_states;
    for (const auto& k : transition_candidates) {
        if (k.size() != shape) throw SpecError("transition candidate has the wrong shape");
        PormdpSpec alt = spec;
        alt.transitions = k;
        alt.validate();
    }
}

DuelFit::DuelFit(const Environment& env, Activation activation)
    : env_(env), activation_(activation), fits_(env.spec.horizon + 1) {
    for (int h : env.spec.feedback_steps) fits_[h] = LeastSquaresFit(env.classes[h].size());
}

void DuelFit::add(const Episode& first, const Episode& second, const std::vector<double>& feedback) {
    const auto& spec = env_.spec;
    for (int k = 0; k < spec.num_feedback(); ++k) {
        const int h = spec.feedback_steps[k];
        const auto& cls = env_.classes[h];
        const std::uint64_t c1 = first.codes[h], c2 = second.codes[h];
        std::vector<double> pred(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i) pred[i] = activate(activation_, difference_value(cls, i, c1, c2));
        fits_[h].add(c1 * cls.values[0].size() + c2, pred, feedback[k]);
    }
    ++count_;
}

std::vector<double> draw_duel_feedback(const PormdpSpec& spec, const DuelingParams& params, const Episode& first,
                                       const Episode& second, Rng& rng) {
    PormdpSpec duel = spec;
    duel.activation = params.activation;
    duel.noise = params.noise;
    duel.noise_scale.assign(spec.num_feedback(), params.noise_scale);
    std::vector<double> out(spec.num_feedback());
    for (int k = 0; k < spec.num_feedback(); ++k)
        out[k] = draw_feedback(duel, k, first.rewards[k] - second.rewards[k], rng);
    return out;
}

DuelLog run_dueling(DuelingAlgorithm algo, const Environment& env, const DuelingParams& params, int T,
                    std::uint64_t seed) {
    const auto& spec = env.spec;
    params.validate(spec);
    if (T < 0) throw SpecError("number of rounds must be nonnegative");
    const bool known_p = params.transition_candidates.empty();
    if (!known_p && algo != DuelingAlgorithm::confidence)
        throw SpecError("transition candidates are supported by the confidence-set variant only");

    const auto U = build_policy_universe(spec, params.max_policies, params.history_cap);
    const std::size_t N = U.size();
    std::vector<double> truth_value(N, 0.0);
    for (std::size_t p = 0; p < N; ++p)
        for (int h : spec.feedback_steps) truth_value[p] += dot(U.occupancy[p][h], env.truth[h]);
    DuelLog log;
    log.optimal_value = *std::max_element(truth_value.begin(), truth_value.end());
    log.min_value = *std::min_element(truth_value.begin(), truth_value.end());
    if (T == 0) return log;
    std::vector<bool> optimal(N);
    for (std::size_t p = 0; p < N; ++p) optimal[p] = truth_value[p] >= log.optimal_value - kArgmaxTolerance;

    std::vector<CandidateValues> tables;
    if (known_p) {
        tables.push_back(candidate_values(env, U));
    } else {
        for (const auto& k : params.transition_candidates) tables.push_back(candidate_values(env, U, k));
    }

    ConfidenceParams conf;
    conf.delta = params.delta;
    conf.eta = params.noise == NoiseKind::bernoulli ? 0.5 : params.noise_scale;
    conf.reward_bound = 2.0 * spec.reward_bound;
    conf.planned_episodes = T;
    conf.horizon = spec.horizon;
    conf.zeta_prefix = params.zeta_prefix;
    conf.bonus_scale = params.bonus_scale;
    conf.validate();
    const double S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    const double delta_bar = params.delta / (H * std::pow(S, 2 * H) * std::pow(A, 2 * H));

    DuelFit fit(env, params.activation);
    TransitionFitState trans(spec.num_states, spec.num_actions);
    Rng rng(seed);
    double cum = 0.0;
    log.entries.reserve(T);

    auto step_masks = [&](int episodes, double delta) {
        std::vector<std::vector<bool>> masks(spec.horizon + 1);
        for (int h : spec.feedback_steps) {
            const auto& f = fit.at(h);
            masks[h] = episodes == 0 ? std::vector<bool>(f.size(), true)
                                     : confidence_set_F(f, beta_threshold(episodes, f.size(), conf, delta));
        }
        return masks;
    };
    auto argmax_pair = [&](const std::vector<double>& score, const std::vector<std::size_t>& allowed) {
        std::pair<std::size_t, std::size_t> best{allowed[0], allowed[0]};
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t a : allowed)
            for (std::size_t b : allowed)
                if (score[a * N + b] > top) {
                    top = score[a * N + b];
                    best = {a, b};
                }
        return best;
    };
    std::vector<std::size_t> everyone(N);
    std::iota(everyone.begin(), everyone.end(), 0);

    for (int t = 1; t <= T; ++t) {
        const int episodes = t - 1;
        std::pair<std::size_t, std::size_t> duel;
        std::vector<std::size_t> cands;
        int opt_flag = -1;
        switch (algo) {
            case DuelingAlgorithm::confidence: {
                const auto masks = step_masks(episodes, params.delta);
                std::vector<CandidateValues> alive;
                if (known_p) {
                    alive = tables;
                } else {
                    for (std::size_t j = 0; j < tables.size(); ++j) {
                        bool inside = true;
                        for (int s = 0; s < spec.num_states && inside; ++s)
                            for (int a = 0; a < spec.num_actions && inside; ++a)
                                inside = trans.l1_distance(params.transition_candidates[j], s, a) <=
                                         l1_radius(trans.count(s, a), params.delta, spec.num_states, spec.num_actions,
                                                   params.zeta_prefix, params.bonus_scale) + 1e-12;
                        if (inside) alive.push_back(tables[j]);
                    }
                }
                cands = candidate_set(alive, masks, spec.feedback_steps, params.max_models);
                duel = most_uncertain_duel(alive, masks, spec.feedback_steps, cands, U.ids);
                break;
            }
            case DuelingAlgorithm::bonus: {
                const auto masks = step_masks(episodes, delta_bar);
                PairTables gamma(spec.horizon + 1);
                std::vector<double> vhat(N, 0.0);
                for (int h : spec.feedback_steps) {
                    gamma[h] = difference_spread(env.classes[h], masks[h]);
                    const auto& fhat = env.classes[h].values[fit.at(h).best()];
                    for (std::size_t p = 0; p < N; ++p) vhat[p] += dot(U.occupancy[p][h], fhat);
                }
                const auto bonus = pair_expectations(spec, U, gamma);
                for (std::size_t p = 0; p < N; ++p) {
                    bool ok = true;
                    for (std::size_t q = 0; q < N && ok; ++q)
                        ok = vhat[p] - vhat[q] + bonus[p * N + q] >= -kArgmaxTolerance;
                    if (ok) cands.push_back(p);
                }
                duel = argmax_pair(bonus, cands);
                break;
            }
            case DuelingAlgorithm::naive_por_ucrl:
            case DuelingAlgorithm::naive_por_ucbvi: {
                const bool ucrl = algo == DuelingAlgorithm::naive_por_ucrl;
                const auto masks = step_masks(episodes, ucrl ? params.delta : delta_bar);
                PairTables reward(spec.horizon + 1);
                for (int h : spec.feedback_steps) {
                    const auto& cls = env.classes[h];
                    const std::size_t n = cls.values[0].size();
                    if (ucrl) {
                        reward[h].assign(n * n, -std::numeric_limits<double>::infinity());
                        for (std::size_t i = 0; i < cls.size(); ++i) {
                            if (!masks[h][i]) continue;
                            for (std::size_t c1 = 0; c1 < n; ++c1)
                                for (std::size_t c2 = 0; c2 < n; ++c2)
                                    reward[h][c1 * n + c2] =
                                        std::max(reward[h][c1 * n + c2], difference_value(cls, i, c1, c2));
                        }
                    } else {
                        reward[h] = difference_spread(cls, masks[h]);
                        const std::size_t best = fit.at(h).best();
                        for (std::size_t c1 = 0; c1 < n; ++c1)
                            for (std::size_t c2 = 0; c2 < n; ++c2)
                                reward[h][c1 * n + c2] += difference_value(cls, best, c1, c2);
                    }
                }
                duel = argmax_pair(pair_expectations(spec, U, reward), everyone);
                break;
            }
        }
        if (!cands.empty() || algo == DuelingAlgorithm::confidence || algo == DuelingAlgorithm::bonus) {
            opt_flag = 0;
            for (std::size_t p : cands) opt_flag = opt_flag || optimal[p];
        }

        DuelEntry e;
        e.round = t;
        e.pi1_id = U.ids[duel.first];
        e.pi2_id = U.ids[duel.second];
        e.regret_inc = log.optimal_value - 0.5 * (truth_value[duel.first] + truth_value[duel.second]);
        cum += e.regret_inc;
        e.cum_regret = cum;
        e.candidate_count = cands.size();
        e.opt_in_candidates = opt_flag;
        log.entries.push_back(e);
        log.pi1_values.push_back(truth_value[duel.first]);
        log.pi2_values.push_back(truth_value[duel.second]);

        const auto ep1 = simulate_episode(spec, env.truth, U.policies[duel.first], rng);
        const auto ep2 = simulate_episode(spec, env.truth, U.policies[duel.second], rng);
        fit.add(ep1, ep2, draw_duel_feedback(spec, params, ep1, ep2, rng));
        for (const auto* ep : {&ep1, &ep2})
            for (std::size_t i = 0; i + 1 < ep->states.size(); ++i)
                trans.add(ep->states[i], ep->actions[i], ep->states[i + 1]);
    }
    return log;
}

}  // namespace porrl
