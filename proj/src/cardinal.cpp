#include "porrl/cardinal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

namespace porrl {

namespace {

std::uint64_t nodes_at(const PormdpSpec& spec, int h, std::uint64_t cap) {
    return history_count(spec, h - 1, cap) * static_cast<std::uint64_t>(spec.num_states);
}

void require_identity(const PormdpSpec& spec, const char* who) {
    if (spec.activation != Activation::identity)
        throw SpecError(std::string(who) + " needs feedback on the reward scale (identity activation)");
}

/// Extended value iteration with a caller-supplied (row, radius) per history.
template <class RowFn>
PlanResult evi_impl(const PormdpSpec& spec, const HistoryRewards& r, RowFn row_of, std::uint64_t cap) {
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    PlanResult out;
    out.policy.action.resize(H + 1);
    std::vector<double> v_next, values(S), row(S);
    for (int h = H; h >= 1; --h) {
        const std::uint64_t nodes = nodes_at(spec, h, cap);
        const bool feedback = spec.is_feedback_step(h);
        std::vector<double> v(nodes);
        auto& act = out.policy.action[h];
        act.resize(nodes);
        for (std::uint64_t node = 0; node < nodes; ++node) {
            const int s = static_cast<int>(node % S);
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                const std::uint64_t code = node * A + a;
                double q = feedback ? r[h][code] : 0.0;
                if (h < H) {
                    const auto [phat, radius] = row_of(h, code, s, a);
                    row.assign(phat, phat + S);
                    for (int s2 = 0; s2 < S; ++s2) values[s2] = v_next[code * S + s2];
                    const auto p = optimistic_row(row, values, radius);
                    for (int s2 = 0; s2 < S; ++s2) q += p[s2] * values[s2];
                }
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v[node] = best;
            act[node] = best_a;
        }
        v_next.swap(v);
    }
    out.value = v_next[spec.initial_state];
    return out;
}

ConfidenceParams confidence_for(const Environment& env, const CardinalParams& params, int planned) {
    ConfidenceParams c;
    c.delta = params.delta;
    c.reward_bound = env.spec.reward_bound;
    c.planned_episodes = std::max(planned, 1);
    c.horizon = env.spec.horizon;
    c.zeta_prefix = params.zeta_prefix;
    c.bonus_scale = params.bonus_scale;
    c.validate();
    return c;
}

RewardFitState empty_fits(const Environment& env) {
    RewardFitState fits;
    fits.by_step.resize(env.spec.horizon + 1);
    for (int h : env.spec.feedback_steps) fits.by_step[h] = LeastSquaresFit(env.classes[h].size());
    return fits;
}

void absorb_feedback(const Environment& env, RewardFitState& fits, const Episode& ep) {
    for (int k = 0; k < env.spec.num_feedback(); ++k) {
        const int h = env.spec.feedback_steps[k];
        const std::uint64_t code = ep.codes[h];
        fits.by_step[h].add(code, class_predictions(env.classes[h], code, env.spec.activation), ep.feedback[k]);
    }
}

void absorb_transitions(TransitionFitState& trans, const Episode& ep) {
    for (std::size_t i = 0; i + 1 < ep.states.size(); ++i) trans.add(ep.states[i], ep.actions[i], ep.states[i + 1]);
}

/// Confidence mask at step h after `episodes` episodes of data.
std::vector<bool> step_mask(const Environment& env, const RewardFitState& fits, const ConfidenceParams& conf,
                            int h, int episodes, double delta) {
    const auto& fit = fits.by_step[h];
    if (episodes == 0) return std::vector<bool>(fit.size(), true);
    ConfidenceParams c = conf;
    c.eta = env.spec.noise_eta(env.spec.feedback_index(h));
    return confidence_set_F(fit, beta_threshold(episodes, fit.size(), c, delta));
}

int flag(bool b) { return b ? 1 : 0; }

std::vector<double> ucrl_radii(const PormdpSpec& spec, const TransitionFitState& trans, const CardinalParams& p) {
    const int S = spec.num_states, A = spec.num_actions;
    std::vector<double> radii(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            radii[s * A + a] = l1_radius(trans.count(s, a), p.delta, S, A, p.zeta_prefix, p.bonus_scale);
    return radii;
}

bool kernel_covered(const PormdpSpec& spec, const TransitionFitState& trans, const std::vector<double>& radii) {
    for (int s = 0; s < spec.num_states; ++s)
        for (int a = 0; a < spec.num_actions; ++a)
            if (trans.l1_distance(spec.transitions, s, a) > radii[s * spec.num_actions + a] + 1e-12) return false;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Q-class

QClass build_qclass(const Environment& env, std::uint64_t cap) {
    const auto& spec = env.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    QClass qc;
    qc.q.resize(env.joint_models.size());
    qc.vmax.resize(env.joint_models.size());
    for (std::size_t m = 0; m < env.joint_models.size(); ++m) {
        const auto f = env.model_rewards(static_cast<int>(m));
        auto& q = qc.q[m];
        auto& vmax = qc.vmax[m];
        q.resize(H + 1);
        vmax.resize(H + 1);
        for (int h = H; h >= 1; --h) {
            const std::uint64_t nodes = nodes_at(spec, h, cap);
            const bool feedback = spec.is_feedback_step(h);
            q[h].assign(nodes * A, 0.0);
            vmax[h].assign(nodes, 0.0);
            for (std::uint64_t node = 0; node < nodes; ++node) {
                const int s = static_cast<int>(node % S);
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A; ++a) {
                    const std::uint64_t code = node * A + a;
                    double v = feedback ? f[h][code] : 0.0;
                    if (h < H)
                        for (int s2 = 0; s2 < S; ++s2) v += spec.P(s, a, s2) * vmax[h + 1][code * S + s2];
                    q[h][code] = v;
                    best = std::max(best, v);
                }
                vmax[h][node] = best;
            }
        }
    }
    if (bellman_residual(env, qc) > 1e-9) throw PorrlError("Q-class violates its Bellman equations");
    return qc;
}

double bellman_residual(const Environment& env, const QClass& qc) {
    const auto& spec = env.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    double worst = 0.0;
    for (std::size_t m = 0; m < qc.size(); ++m) {
        const auto f = env.model_rewards(static_cast<int>(m));
        for (int h = 1; h <= H; ++h) {
            for (std::uint64_t code = 0; code < qc.q[m][h].size(); ++code) {
                const int s = code_state(spec, code), a = code_action(spec, code);
                double target = spec.is_feedback_step(h) ? f[h][code] : 0.0;
                if (h < H) {
                    for (int s2 = 0; s2 < S; ++s2) {
                        double next = -std::numeric_limits<double>::infinity();
                        for (int a2 = 0; a2 < A; ++a2)
                            next = std::max(next, qc.q[m][h + 1][(code * S + s2) * A + a2]);
                        target += spec.P(s, a, s2) * next;
                    }
                }
                worst = std::max(worst, std::abs(qc.q[m][h][code] - target));
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Parameters and names

void CardinalParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw SpecError("delta must lie in (0, 1)");
    if (!(bonus_scale > 0.0)) throw SpecError("bonus_scale must be positive");
    if (!(zeta_prefix > 0.0)) throw SpecError("zeta_prefix must be positive");
    if (!(golf_c > 0.0)) throw SpecError("golf_c must be positive");
}

const std::vector<std::string>& cardinal_algorithm_names() {
    static const std::vector<std::string> names{"por_ucrl", "por_ucbvi", "golf", "markovian_ucbvi_baseline",
                                                "naive_history_ucrl"};
    return names;
}

std::string to_string(CardinalAlgorithm algo) { return cardinal_algorithm_names()[static_cast<int>(algo)]; }

CardinalAlgorithm parse_cardinal_algorithm(const std::string& name) {
    const auto& names = cardinal_algorithm_names();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SpecError("unknown cardinal algorithm '" + name + "'");
    return static_cast<CardinalAlgorithm>(it - names.begin());
}

// ---------------------------------------------------------------------------
// Extended value iteration

std::vector<double> optimistic_row(const std::vector<double>& row, const std::vector<double>& values, double radius) {
    const std::size_t n = row.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] > values[j]; });
    std::vector<double> p = row;
    const std::size_t top = order[0];
    p[top] = std::min(1.0, row[top] + radius / 2.0);
    double excess = p[top] - row[top];
    for (std::size_t i = n; i-- > 1 && excess > 0.0;) {
        const std::size_t j = order[i];
        const double take = std::min(p[j], excess);
        p[j] -= take;
        excess -= take;
    }
    return p;
}

PlanResult extended_value_iteration(const PormdpSpec& spec, const std::vector<double>& phat,
                                    const std::vector<double>& radii, const HistoryRewards& r_tilde,
                                    std::uint64_t cap) {
    const int S = spec.num_states, A = spec.num_actions;
    if (phat.size() != static_cast<std::size_t>(S) * A * S) throw SpecError("kernel estimate has the wrong shape");
    if (radii.size() != static_cast<std::size_t>(S) * A) throw SpecError("malformed radii: need one per (s, a)");
    for (double r : radii)
        if (!(r >= 0.0 && r <= 2.0)) throw SpecError("malformed radii: each must lie in [0, 2]");
    if (r_tilde.size() != static_cast<std::size_t>(spec.horizon) + 1)
        throw SpecError("reward table must have one row per step 0..H");
    for (int h : spec.feedback_steps)
        if (r_tilde[h].size() != history_count(spec, h, cap)) throw SpecError("reward table missing entries");
    auto row_of = [&](int, std::uint64_t, int s, int a) {
        return std::pair<const double*, double>(&phat[(static_cast<std::size_t>(s) * A + a) * S], radii[s * A + a]);
    };
    return evi_impl(spec, r_tilde, row_of, cap);
}

// ---------------------------------------------------------------------------
// POR-UCRL

PorUcrl::PorUcrl(const Environment& env, const CardinalParams& params, int planned_episodes)
    : env_(env),
      params_(params),
      conf_(confidence_for(env, params, planned_episodes)),
      fits_(empty_fits(env)),
      trans_(env.spec.num_states, env.spec.num_actions) {
    params_.validate();
}

EpisodePlan PorUcrl::plan(int t) {
    const auto& spec = env_.spec;
    const int episodes = t - 1;
    masks_.assign(spec.horizon + 1, {});
    HistoryRewards r_tilde(spec.horizon + 1);
    bool truth_in = true;
    for (int h : spec.feedback_steps) {
        masks_[h] = step_mask(env_, fits_, conf_, h, episodes, params_.delta);
        truth_in = truth_in && masks_[h][env_.truth_index[h]];
        const auto& cls = env_.classes[h];
        r_tilde[h].assign(cls.values[0].size(), -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < cls.size(); ++i) {
            if (!masks_[h][i]) continue;
            for (std::size_t c = 0; c < r_tilde[h].size(); ++c) r_tilde[h][c] = std::max(r_tilde[h][c], cls.values[i][c]);
        }
    }
    const auto radii = ucrl_radii(spec, trans_, params_);
    auto planned = extended_value_iteration(spec, trans_.estimate(), radii, r_tilde, params_.history_cap);
    EpisodePlan out;
    out.policy = std::move(planned.policy);
    out.optimistic_value = planned.value;
    out.truth_in_cf = flag(truth_in);
    out.truth_in_cp = flag(kernel_covered(spec, trans_, radii));
    return out;
}

void PorUcrl::update(const Episode& ep) {
    absorb_feedback(env_, fits_, ep);
    absorb_transitions(trans_, ep);
}

// ---------------------------------------------------------------------------
// POR-UCBVI

PorUcbvi::PorUcbvi(const Environment& env, const CardinalParams& params, int planned_episodes)
    : env_(env),
      params_(params),
      conf_(confidence_for(env, params, planned_episodes)),
      fits_(empty_fits(env)),
      trans_(env.spec.num_states, env.spec.num_actions) {
    params_.validate();
}

std::vector<double> PorUcbvi::transition_bonus_table(int t) const {
    const auto& spec = env_.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    std::vector<double> xi(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) xi[s * A + a] = transition_bonus_xi(trans_.count(s, a), t, params_.delta, S, A, H);
    // Running ξ-sums over steps 1..H-1 along every history.
    std::vector<double> sums{0.0};
    for (int h = 1; h <= H; ++h) {
        const std::uint64_t n = history_count(spec, h, params_.history_cap);
        std::vector<double> next(n);
        for (std::uint64_t code = 0; code < n; ++code) {
            const std::uint64_t digit = code % (static_cast<std::uint64_t>(S) * A);
            next[code] = sums[code / (static_cast<std::uint64_t>(S) * A)] + (h < H ? xi[digit] : 0.0);
        }
        sums.swap(next);
    }
    const double z = z_of(spec.reward_bound * spec.num_feedback(), params_.bonus_scale);
    for (double& x : sums) x = z * std::min(4.0, x);
    return sums;
}

EpisodePlan PorUcbvi::plan(int t) {
    const auto& spec = env_.spec;
    const int episodes = t - 1;
    const double delta_bar = params_.delta / (spec.horizon * std::pow(static_cast<double>(spec.num_states), spec.horizon) *
                                              std::pow(static_cast<double>(spec.num_actions), spec.horizon));
    HistoryRewards reward(spec.horizon + 1);
    bool truth_in = true;
    for (int h : spec.feedback_steps) {
        const auto& cls = env_.classes[h];
        const auto& fhat = cls.values[fits_.by_step[h].best()];
        const auto wide = step_mask(env_, fits_, conf_, h, episodes, delta_bar);
        truth_in = truth_in && step_mask(env_, fits_, conf_, h, episodes, params_.delta)[env_.truth_index[h]];
        reward[h].resize(fhat.size());
        for (std::size_t c = 0; c < fhat.size(); ++c) reward[h][c] = fhat[c] + reward_bonus_gamma(cls, wide, c);
    }
    const auto terminal = transition_bonus_table(t);
    auto planned = backward_induction(spec, trans_.estimate(), reward, &terminal, params_.history_cap);
    EpisodePlan out;
    out.policy = std::move(planned.policy);
    out.optimistic_value = planned.value;
    out.truth_in_cf = flag(truth_in);
    out.truth_in_cp = flag(kernel_covered(spec, trans_, ucrl_radii(spec, trans_, params_)));
    return out;
}

void PorUcbvi::update(const Episode& ep) {
    absorb_feedback(env_, fits_, ep);
    absorb_transitions(trans_, ep);
}

// ---------------------------------------------------------------------------
// GOLF

std::vector<bool> golf_confidence_set(const GolfLosses& losses, double beta) {
    const std::size_t M = losses.num_tuples;
    std::vector<bool> mask(M, true);
    for (std::size_t m = 0; m < M; ++m) {
        for (int h = 1; h <= losses.horizon && mask[m]; ++h) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < M; ++g) best = std::min(best, losses.at(h, g, m));
            mask[m] = losses.at(h, m, m) <= best + beta;
        }
    }
    return mask;
}

int golf_act(const std::vector<bool>& mask, const QClass& qc, int h, std::uint64_t node, int num_actions) {
    bool any = std::find(mask.begin(), mask.end(), true) != mask.end();
    if (!any) spdlog::warn("GOLF confidence set is empty; acting on the full class");
    int best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < num_actions; ++a) {
        const std::uint64_t code = node * num_actions + a;
        for (std::size_t m = 0; m < qc.size(); ++m) {
            if (any && !mask[m]) continue;
            if (qc.q[m][h][code] > best) {
                best = qc.q[m][h][code];
                best_a = a;
            }
        }
    }
    return best_a;
}

Golf::Golf(const Environment& env, const CardinalParams& params, int planned_episodes)
    : env_(env), params_(params), qc_(build_qclass(env, params.history_cap)) {
    params_.validate();
    require_identity(env.spec, "GOLF");
    const int H = env.spec.horizon;
    losses_.horizon = H;
    losses_.num_tuples = qc_.size();
    losses_.loss.assign(H + 1, std::vector<double>(qc_.size() * qc_.size(), 0.0));
    const double N = 2.0 * static_cast<double>(qc_.size());
    beta_ = params_.golf_c * std::log(H * static_cast<double>(std::max(planned_episodes, 1)) * N) * params_.bonus_scale;
}

EpisodePlan Golf::plan(int t) {
    const auto& spec = env_.spec;
    auto mask = golf_confidence_set(losses_, beta_);
    EpisodePlan out;
    out.truth_in_cf = flag(mask[env_.true_model]);
    if (std::find(mask.begin(), mask.end(), true) == mask.end()) {
        if (!warned_empty_) spdlog::warn("GOLF confidence set is empty at episode {}; acting on the full class", t);
        warned_empty_ = true;
        mask.assign(mask.size(), true);
    }
    out.policy.action.resize(spec.horizon + 1);
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t nodes = nodes_at(spec, h, params_.history_cap);
        out.policy.action[h].resize(nodes);
        for (std::uint64_t node = 0; node < nodes; ++node)
            out.policy.action[h][node] = golf_act(mask, qc_, h, node, spec.num_actions);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < qc_.size(); ++m)
        if (mask[m]) best = std::max(best, qc_.vmax[m][1][spec.initial_state]);
    out.optimistic_value = best;
    return out;
}

void Golf::update(const Episode& ep) {
    const auto& spec = env_.spec;
    const int S = spec.num_states, H = spec.horizon;
    const std::size_t M = qc_.size();
    std::vector<double> target(M);
    for (int h = 1; h <= H; ++h) {
        const std::uint64_t code = ep.codes[h];
        const int k = spec.feedback_index(h);
        const double o = k >= 0 ? ep.feedback[k] : 0.0;
        for (std::size_t m = 0; m < M; ++m)
            target[m] = o + (h < H ? qc_.vmax[m][h + 1][code * S + ep.states[h]] : 0.0);
        auto& L = losses_.loss[h];
        for (std::size_t g = 0; g < M; ++g) {
            const double pred = qc_.q[g][h][code];
            for (std::size_t m = 0; m < M; ++m) {
                const double e = pred - target[m];
                L[g * M + m] += e * e;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Markovian UCBVI baseline

MarkovianUcbvi::MarkovianUcbvi(const Environment& env, const CardinalParams& params, int planned_episodes)
    : env_(env),
      params_(params),
      planned_(std::max(planned_episodes, 1)),
      count_(static_cast<std::size_t>(env.spec.horizon + 1) * env.spec.num_states * env.spec.num_actions, 0),
      feedback_sum_(count_.size(), 0.0),
      trans_(env.spec.num_states, env.spec.num_actions) {
    params_.validate();
    require_identity(env.spec, "the Markovian baseline");
}

EpisodePlan MarkovianUcbvi::plan(int) {
    const auto& spec = env_.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    const double vmax = spec.reward_bound * spec.num_feedback();
    const double log_term = std::log(2.0 * S * A * H * static_cast<double>(planned_) / params_.delta);
    const auto phat = trans_.estimate();
    std::vector<std::vector<int>> act(H + 1, std::vector<int>(S, 0));
    std::vector<double> v_next(S, 0.0), v(S);
    for (int h = H; h >= 1; --h) {
        const bool feedback = spec.is_feedback_step(h);
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const std::size_t idx = (static_cast<std::size_t>(h) * S + s) * A + a;
                const auto n = count_[idx];
                double q = n == 0 ? vmax
                                  : (feedback ? feedback_sum_[idx] / n : 0.0) +
                                        params_.bonus_scale * vmax * std::sqrt(log_term / (2.0 * n));
                if (h < H)
                    for (int s2 = 0; s2 < S; ++s2) q += phat[(static_cast<std::size_t>(s) * A + a) * S + s2] * v_next[s2];
                q = std::min(q, vmax);
                if (q > best) {
                    best = q;
                    act[h][s] = a;
                }
            }
            v[s] = best;
        }
        v_next = v;
    }
    EpisodePlan out;
    out.policy = markov_policy(spec, act, params_.history_cap);
    out.optimistic_value = v_next[spec.initial_state];
    return out;
}

void MarkovianUcbvi::update(const Episode& ep) {
    const auto& spec = env_.spec;
    const int S = spec.num_states, A = spec.num_actions;
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::size_t idx = (static_cast<std::size_t>(h) * S + ep.states[h - 1]) * A + ep.actions[h - 1];
        ++count_[idx];
        const int k = spec.feedback_index(h);
        if (k >= 0) feedback_sum_[idx] += ep.feedback[k];
    }
    absorb_transitions(trans_, ep);
}

// ---------------------------------------------------------------------------
// History-as-state UCRL baseline

NaiveHistoryUcrl::NaiveHistoryUcrl(const Environment& env, const CardinalParams& params, int)
    : env_(env), params_(params) {
    params_.validate();
    require_identity(env.spec, "the history-as-state baseline");
    const auto& spec = env.spec;
    visits_.resize(spec.horizon + 1);
    feedback_sum_.resize(spec.horizon + 1);
    successors_.resize(spec.horizon + 1);
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t n = history_count(spec, h, params.history_cap);
        node_count_ += nodes_at(spec, h, params.history_cap);
        visits_[h].assign(n, 0);
        feedback_sum_[h].assign(n, 0.0);
        if (h < spec.horizon) successors_[h].assign(n * spec.num_states, 0);
    }
}

EpisodePlan NaiveHistoryUcrl::plan(int t) {
    const auto& spec = env_.spec;
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    const double B = spec.reward_bound;
    const double log_term = std::log(2.0 * static_cast<double>(node_count_) * A * static_cast<double>(t) * t / params_.delta);
    HistoryRewards r_tilde(H + 1);
    for (int h : spec.feedback_steps) {
        const double eta = spec.noise_eta(spec.feedback_index(h));
        r_tilde[h].resize(visits_[h].size());
        for (std::size_t c = 0; c < visits_[h].size(); ++c) {
            const auto n = visits_[h][c];
            r_tilde[h][c] = n == 0 ? B
                                   : std::min(B, feedback_sum_[h][c] / n +
                                                     params_.bonus_scale * eta * std::sqrt(2.0 * log_term / n));
        }
    }
    // Per-history kernel estimates and radii.
    std::vector<std::vector<double>> phat(H + 1), radius(H + 1);
    bool covered = true;
    for (int h = 1; h < H; ++h) {
        const std::size_t n = visits_[h].size();
        phat[h].resize(n * S);
        radius[h].resize(n);
        for (std::size_t c = 0; c < n; ++c) {
            const auto visits = visits_[h][c];
            radius[h][c] = l1_radius(visits, params_.delta, static_cast<int>(node_count_), A, params_.zeta_prefix,
                                     params_.bonus_scale);
            double l1 = 0.0;
            const int s = code_state(spec, c), a = code_action(spec, c);
            for (int s2 = 0; s2 < S; ++s2) {
                phat[h][c * S + s2] = visits == 0 ? 1.0 / S : static_cast<double>(successors_[h][c * S + s2]) / visits;
                l1 += std::abs(phat[h][c * S + s2] - spec.P(s, a, s2));
            }
            if (visits > 0 && l1 > radius[h][c] + 1e-12) covered = false;
        }
    }
    auto row_of = [&](int h, std::uint64_t code, int, int) {
        return std::pair<const double*, double>(&phat[h][code * S], radius[h][code]);
    };
    auto planned = evi_impl(spec, r_tilde, row_of, params_.history_cap);
    EpisodePlan out;
    out.policy = std::move(planned.policy);
    out.optimistic_value = planned.value;
    out.truth_in_cp = flag(covered);
    return out;
}

void NaiveHistoryUcrl::update(const Episode& ep) {
    const auto& spec = env_.spec;
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t code = ep.codes[h];
        ++visits_[h][code];
        const int k = spec.feedback_index(h);
        if (k >= 0) feedback_sum_[h][code] += ep.feedback[k];
        if (h < spec.horizon) ++successors_[h][code * spec.num_states + ep.states[h]];
    }
}

// ---------------------------------------------------------------------------
// Runner

std::unique_ptr<CardinalLearner> make_cardinal_learner(CardinalAlgorithm algo, const Environment& env,
                                                       const CardinalParams& params, int planned_episodes) {
    switch (algo) {
        case CardinalAlgorithm::por_ucrl: return std::make_unique<PorUcrl>(env, params, planned_episodes);
        case CardinalAlgorithm::por_ucbvi: return std::make_unique<PorUcbvi>(env, params, planned_episodes);
        case CardinalAlgorithm::golf: return std::make_unique<Golf>(env, params, planned_episodes);
        case CardinalAlgorithm::markovian_ucbvi_baseline:
            return std::make_unique<MarkovianUcbvi>(env, params, planned_episodes);
        case CardinalAlgorithm::naive_history_ucrl:
            return std::make_unique<NaiveHistoryUcrl>(env, params, planned_episodes);
    }
    throw SpecError("unknown cardinal algorithm");
}

RegretLog run_cardinal(CardinalAlgorithm algo, const Environment& env, const CardinalParams& params, int T,
                       std::uint64_t seed, bool store_policies) {
    if (T < 0) throw SpecError("number of episodes must be nonnegative");
    RegretLog log;
    log.optimal_value = optimal_policy(env.spec, env.truth, params.history_cap).value;
    if (T == 0) return log;
    auto learner = make_cardinal_learner(algo, env, params, T);
    Rng rng(seed);
    double cum = 0.0;
    log.entries.reserve(T);
    for (int t = 1; t <= T; ++t) {
        auto plan = learner->plan(t);
        RegretEntry e;
        e.episode = t;
        e.policy_id = policy_id(env.spec, plan.policy, params.history_cap);
        e.value = policy_value(env.spec, env.truth, plan.policy, params.history_cap);
        e.regret_inc = log.optimal_value - e.value;
        cum += e.regret_inc;
        e.cum_regret = cum;
        e.optimistic_value = plan.optimistic_value;
        e.truth_in_cf = plan.truth_in_cf;
        e.truth_in_cp = plan.truth_in_cp;
        log.entries.push_back(e);
        const auto ep = simulate_episode(env.spec, env.truth, plan.policy, rng);
        learner->update(ep);
        if (store_policies) log.policies.push_back(std::move(plan.policy));
    }
    return log;
}

std::size_t pac_sample_index(std::size_t T, std::uint64_t seed) {
    if (T == 0) throw SpecError("regret-to-PAC conversion needs at least one episode");
    Rng rng(seed);
    return static_cast<std::size_t>(rng.below(T));
}

PacSample regret_to_pac(const RegretLog& log, const PormdpSpec& spec, const HistoryRewards& truth, std::uint64_t seed) {
    if (log.entries.empty()) throw SpecError("regret-to-PAC conversion needs at least one episode");
    if (log.policies.size() != log.entries.size()) throw SpecError("regret log does not carry its policies");
    PacSample out;
    out.index = pac_sample_index(log.entries.size(), seed);
    out.policy = log.policies[out.index];
    out.gap = log.optimal_value - policy_value(spec, truth, out.policy);
    return out;
}

double pac_gap_bound(double cumulative_regret, int T, double reward_bound, int p, double delta) {
    if (T < 1) throw SpecError("PAC bound needs T >= 1");
    return cumulative_regret / T + 8.0 * reward_bound * p * std::sqrt(std::log(1.0 / delta) / T);
}

}  // namespace porrl
