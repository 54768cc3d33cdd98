#include "porrl/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

namespace porrl {

double Rng::normal() {
    // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

int sample_row(const double* probs, int n, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
        if (probs[i] <= 0.0) continue;
        cum += probs[i];
        last_positive = i;
        if (u < cum) return i;
    }
    // Rounding can leave the cumulative sum just below 1.
    return last_positive;
}

std::uint64_t nodes_at_step(const PormdpSpec& spec, int h, std::uint64_t cap) {
    return history_count(spec, h - 1, cap) * static_cast<std::uint64_t>(spec.num_states);
}

void check_policy_shape(const PormdpSpec& spec, const HistoryPolicy& pi, std::uint64_t cap) {
    const auto H = static_cast<std::size_t>(spec.horizon);
    const bool stochastic = pi.is_stochastic();
    const std::size_t rows = stochastic ? pi.dist.size() : pi.action.size();
    if (rows != H + 1) throw SpecError("policy must have one table per step 1..H");
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t n = nodes_at_step(spec, h, cap);
        const std::size_t got = stochastic ? pi.dist[h].size() : pi.action[h].size();
        if (got != n) throw SpecError("policy table at step " + std::to_string(h) + " has wrong size");
    }
}

void check_reward_shape(const PormdpSpec& spec, const HistoryRewards& f, std::uint64_t cap) {
    if (f.size() != static_cast<std::size_t>(spec.horizon) + 1)
        throw SpecError("reward table must have one row per step 0..H");
    for (int h : spec.feedback_steps) {
        if (f[h].size() != history_count(spec, h, cap))
            throw SpecError("reward table missing entries at step " + std::to_string(h));
    }
}

}  // namespace

int Rng::categorical(const std::vector<double>& probs) {
    return sample_row(probs.data(), static_cast<int>(probs.size()), *this);
}

double activate(Activation act, double x) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::logistic: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

std::string to_string(Activation act) {
    return act == Activation::identity ? "identity" : "logistic";
}

std::string to_string(NoiseKind kind) {
    return kind == NoiseKind::bernoulli ? "bernoulli" : "gaussian";
}

int PormdpSpec::feedback_index(int h) const {
    auto it = std::lower_bound(feedback_steps.begin(), feedback_steps.end(), h);
    if (it == feedback_steps.end() || *it != h) return -1;
    return static_cast<int>(it - feedback_steps.begin());
}

double PormdpSpec::noise_eta(int k) const {
    return noise == NoiseKind::bernoulli ? 0.5 : noise_scale.at(k);
}

void PormdpSpec::validate() const {
    if (num_states < 1 || num_actions < 1 || horizon < 1 || num_internal < 1)
        throw SpecError("state, action, internal-state counts and horizon must be positive");
    if (feedback_steps.empty()) throw SpecError("feedback step set must be nonempty");
    for (std::size_t k = 0; k < feedback_steps.size(); ++k) {
        const int h = feedback_steps[k];
        if (h < 1 || h > horizon) throw SpecError("feedback step out of range: " + std::to_string(h));
        if (k > 0 && feedback_steps[k - 1] >= h) throw SpecError("feedback steps must be strictly ascending");
    }
    const std::size_t S = num_states, A = num_actions;
    if (transitions.size() != S * A * S) throw SpecError("transition tensor must have shape [S][A][S]");
    for (std::size_t sa = 0; sa < S * A; ++sa) {
        double sum = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
            const double p = transitions[sa * S + j];
            if (!(p >= 0.0)) throw SpecError("transition probabilities must be nonnegative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw SpecError("transition row does not sum to 1");
    }
    if (initial_state < 0 || initial_state >= num_states) throw SpecError("initial state out of range");
    if (!(reward_bound > 0.0)) throw SpecError("reward bound must be positive");
    const std::size_t p = feedback_steps.size();
    if (decoder.size() != p || reward.size() != p)
        throw SpecError("decoder and reward tables must have one entry per feedback step");
    for (std::size_t k = 0; k < p; ++k) {
        const std::uint64_t n = history_count(*this, feedback_steps[k], std::numeric_limits<std::uint64_t>::max());
        if (decoder[k].size() != n)
            throw SpecError("decoder at step " + std::to_string(feedback_steps[k]) + " is not defined on every history");
        for (int u : decoder[k])
            if (u < 0 || u >= num_internal) throw SpecError("decoder emits an unknown internal state");
        if (reward[k].size() != S * static_cast<std::size_t>(num_internal) * A)
            throw SpecError("reward table must have shape [S][U][A]");
        for (double x : reward[k]) {
            if (!std::isfinite(x) || std::abs(x) > reward_bound + 1e-12)
                throw SpecError("reward exceeds the reward bound");
            if (noise == NoiseKind::bernoulli) {
                const double m = activate(activation, x);
                if (m < -1e-12 || m > 1.0 + 1e-12)
                    throw SpecError("bernoulli feedback requires activated rewards in [0,1]");
            }
        }
    }
    if (noise == NoiseKind::gaussian) {
        if (noise_scale.size() != p) throw SpecError("gaussian feedback needs one noise scale per feedback step");
        for (double e : noise_scale)
            if (!(e >= 0.0)) throw SpecError("noise scale must be nonnegative");
    }
}

std::uint64_t history_count(const PormdpSpec& spec, int h, std::uint64_t cap) {
    const std::uint64_t base = static_cast<std::uint64_t>(spec.num_states) * spec.num_actions;
    std::uint64_t n = 1;
    for (int i = 0; i < h; ++i) {
        if (n > cap / base) {
            throw SizeError("instance too large for exact mode: (S*A)^" + std::to_string(h) +
                            " exceeds the cap of " + std::to_string(cap) + " histories");
        }
        n *= base;
    }
    if (n > cap) {
        throw SizeError("instance too large for exact mode: (S*A)^" + std::to_string(h) +
                        " exceeds the cap of " + std::to_string(cap) + " histories");
    }
    return n;
}

std::vector<std::uint64_t> enumerate_histories(const PormdpSpec& spec, int h, std::uint64_t cap) {
    const std::uint64_t n = history_count(spec, h, cap);
    std::vector<std::uint64_t> codes(n);
    for (std::uint64_t i = 0; i < n; ++i) codes[i] = i;
    return codes;
}

std::uint64_t encode_history(const PormdpSpec& spec, const std::vector<std::pair<int, int>>& steps) {
    std::uint64_t code = 0;
    const std::uint64_t base = static_cast<std::uint64_t>(spec.num_states) * spec.num_actions;
    for (auto [s, a] : steps) {
        if (s < 0 || s >= spec.num_states || a < 0 || a >= spec.num_actions)
            throw SpecError("history entry out of range");
        code = code * base + static_cast<std::uint64_t>(s) * spec.num_actions + a;
    }
    return code;
}

std::vector<std::pair<int, int>> decode_history(const PormdpSpec& spec, int h, std::uint64_t code) {
    const std::uint64_t base = static_cast<std::uint64_t>(spec.num_states) * spec.num_actions;
    std::vector<std::pair<int, int>> steps(h);
    for (int i = h - 1; i >= 0; --i) {
        const std::uint64_t digit = code % base;
        code /= base;
        steps[i] = {static_cast<int>(digit / spec.num_actions), static_cast<int>(digit % spec.num_actions)};
    }
    if (code != 0) throw SpecError("history code out of range for its length");
    return steps;
}

HistoryRewards compose_rewards(const PormdpSpec& spec, std::uint64_t cap) {
    HistoryRewards f(spec.horizon + 1);
    for (int k = 0; k < spec.num_feedback(); ++k) {
        const int h = spec.feedback_steps[k];
        const std::uint64_t n = history_count(spec, h, cap);
        f[h].resize(n);
        for (std::uint64_t code = 0; code < n; ++code) {
            f[h][code] = spec.r(k, code_state(spec, code), spec.decoder[k][code], code_action(spec, code));
        }
    }
    return f;
}

HistoryPolicy uniform_action_policy(const PormdpSpec& spec, int a, std::uint64_t cap) {
    HistoryPolicy pi;
    pi.action.resize(spec.horizon + 1);
    for (int h = 1; h <= spec.horizon; ++h) pi.action[h].assign(nodes_at_step(spec, h, cap), a);
    return pi;
}

HistoryPolicy markov_policy(const PormdpSpec& spec, const std::vector<std::vector<int>>& act,
                            std::uint64_t cap) {
    if (act.size() != static_cast<std::size_t>(spec.horizon) + 1)
        throw SpecError("markov rule must have one row per step 1..H");
    HistoryPolicy pi;
    pi.action.resize(spec.horizon + 1);
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t n = nodes_at_step(spec, h, cap);
        pi.action[h].resize(n);
        for (std::uint64_t node = 0; node < n; ++node) pi.action[h][node] = act[h][node % spec.num_states];
    }
    return pi;
}

std::vector<std::vector<double>> history_occupancy(const PormdpSpec& spec, const HistoryPolicy& pi,
                                                   std::uint64_t cap) {
    check_policy_shape(spec, pi, cap);
    const int S = spec.num_states, A = spec.num_actions;
    std::vector<std::vector<double>> occ(spec.horizon + 1);
    occ[0] = {1.0};
    std::vector<double> reach(S, 0.0);
    reach[spec.initial_state] = 1.0;
    for (int h = 1; h <= spec.horizon; ++h) {
        occ[h].assign(reach.size() * A, 0.0);
        for (std::uint64_t node = 0; node < reach.size(); ++node) {
            const double p = reach[node];
            if (p == 0.0) continue;
            for (int a = 0; a < A; ++a) occ[h][node * A + a] += p * pi.prob(h, node, a);
        }
        if (h == spec.horizon) break;
        std::vector<double> next(occ[h].size() * S, 0.0);
        for (std::uint64_t code = 0; code < occ[h].size(); ++code) {
            const double p = occ[h][code];
            if (p == 0.0) continue;
            const int s = code_state(spec, code), a = code_action(spec, code);
            for (int s2 = 0; s2 < S; ++s2) next[code * S + s2] += p * spec.P(s, a, s2);
        }
        reach.swap(next);
    }
    return occ;
}

double policy_value(const PormdpSpec& spec, const HistoryRewards& f, const HistoryPolicy& pi,
                    std::uint64_t cap) {
    check_reward_shape(spec, f, cap);
    const auto occ = history_occupancy(spec, pi, cap);
    double value = 0.0;
    for (int h : spec.feedback_steps) {
        for (std::uint64_t code = 0; code < occ[h].size(); ++code) {
            if (occ[h][code] != 0.0) value += occ[h][code] * f[h][code];
        }
    }
    return value;
}

PlanResult backward_induction(const PormdpSpec& spec, const std::vector<double>& transitions,
                              const HistoryRewards& f, const std::vector<double>* terminal,
                              std::uint64_t cap) {
    check_reward_shape(spec, f, cap);
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    if (transitions.size() != static_cast<std::size_t>(S) * A * S)
        throw SpecError("transition tensor must have shape [S][A][S]");
    if (terminal && terminal->size() != history_count(spec, H, cap))
        throw SpecError("terminal table must cover every full-length history");

    PlanResult out;
    out.policy.action.resize(H + 1);
    std::vector<double> v_next;
    for (int h = H; h >= 1; --h) {
        const std::uint64_t nodes = nodes_at_step(spec, h, cap);
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
                double q = feedback ? f[h][code] : 0.0;
                if (h == H) {
                    if (terminal) q += (*terminal)[code];
                } else {
                    const double* row = &transitions[(static_cast<std::size_t>(s) * A + a) * S];
                    for (int s2 = 0; s2 < S; ++s2) q += row[s2] * v_next[code * S + s2];
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

PlanResult optimal_policy(const PormdpSpec& spec, const HistoryRewards& f, std::uint64_t cap) {
    return backward_induction(spec, spec.transitions, f, nullptr, cap);
}

double min_policy_value(const PormdpSpec& spec, const HistoryRewards& f, std::uint64_t cap) {
    HistoryRewards neg = f;
    for (auto& row : neg)
        for (double& x : row) x = -x;
    return -optimal_policy(spec, neg, cap).value;
}

double draw_feedback(const PormdpSpec& spec, int k, double x, Rng& rng) {
    const double mean = activate(spec.activation, x);
    if (spec.noise == NoiseKind::bernoulli) return rng.bernoulli(mean) ? 1.0 : 0.0;
    return mean + spec.noise_scale[k] * rng.normal();
}

Episode simulate_episode(const PormdpSpec& spec, const HistoryRewards& f, const HistoryPolicy& pi,
                         Rng& rng) {
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    Episode ep;
    ep.states.resize(H);
    ep.actions.resize(H);
    ep.codes.assign(H + 1, 0);
    ep.rewards.resize(spec.num_feedback());
    ep.feedback.resize(spec.num_feedback());
    int s = spec.initial_state;
    std::uint64_t code = 0;
    for (int h = 1; h <= H; ++h) {
        const std::uint64_t node = code * S + s;
        const int a = pi.is_stochastic() ? rng.categorical(pi.dist[h][node]) : pi.action[h][node];
        code = node * A + a;
        ep.states[h - 1] = s;
        ep.actions[h - 1] = a;
        ep.codes[h] = code;
        const int k = spec.feedback_index(h);
        if (k >= 0) {
            ep.rewards[k] = f[h][code];
            ep.feedback[k] = draw_feedback(spec, k, f[h][code], rng);
        }
        if (h < H) s = sample_row(&spec.transitions[(static_cast<std::size_t>(s) * A + a) * S], S, rng);
    }
    return ep;
}

Episode simulate_episode(const PormdpSpec& spec, const HistoryPolicy& pi, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return simulate_episode(spec, compose_rewards(spec), pi, rng);
}

void StochasticDecoderSpec::validate(const PormdpSpec& spec) const {
    const std::size_t p = spec.feedback_steps.size();
    if (num_internal < 1) throw SpecError("stochastic decoder needs at least one internal state");
    if (w.size() != p || reward.size() != p)
        throw SpecError("stochastic decoder needs one table per feedback step");
    for (std::size_t k = 0; k < p; ++k) {
        if (w[k].size() != history_count(spec, spec.feedback_steps[k]))
            throw SpecError("stochastic decoder is not defined on every history");
        for (const auto& row : w[k]) {
            if (row.size() != static_cast<std::size_t>(num_internal))
                throw SpecError("stochastic decoder row has the wrong length");
            double sum = 0.0;
            for (double x : row) {
                if (!(x >= 0.0)) throw SpecError("stochastic decoder row has a negative entry");
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw SpecError("stochastic decoder row does not sum to 1");
        }
        if (reward[k].size() != static_cast<std::size_t>(spec.num_states) * num_internal * spec.num_actions)
            throw SpecError("stochastic reward table must have shape [S][U][A]");
    }
}

MonteCarloEstimate monte_carlo_value_w(const PormdpSpec& spec, const StochasticDecoderSpec& w,
                                       const HistoryPolicy& pi, std::uint64_t n, std::uint64_t rng_seed) {
    if (n == 0) throw SpecError("monte carlo estimate needs at least one sample");
    w.validate(spec);
    check_policy_shape(spec, pi, kDefaultHistoryCap);
    const int S = spec.num_states, A = spec.num_actions, U = w.num_internal;
    Rng rng(rng_seed);
    double mean = 0.0, m2 = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        int s = spec.initial_state;
        std::uint64_t code = 0;
        double total = 0.0;
        for (int h = 1; h <= spec.horizon; ++h) {
            const std::uint64_t node = code * S + s;
            const int a = pi.is_stochastic() ? rng.categorical(pi.dist[h][node]) : pi.action[h][node];
            code = node * A + a;
            const int k = spec.feedback_index(h);
            if (k >= 0) {
                const int u = rng.categorical(w.w[k][code]);
                total += w.reward[k][(static_cast<std::size_t>(s) * U + u) * A + a];
            }
            if (h < spec.horizon)
                s = sample_row(&spec.transitions[(static_cast<std::size_t>(s) * A + a) * S], S, rng);
        }
        const double delta = total - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (total - mean);
    }
    MonteCarloEstimate est;
    est.mean = mean;
    est.std_error = n < 2 ? std::numeric_limits<double>::infinity()
                          : std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    return est;
}

std::uint64_t policy_id(const PormdpSpec& spec, const HistoryPolicy& pi, std::uint64_t cap) {
    // FNV-1a over (step, node, action) for every node the policy reaches.
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            hash ^= (x >> (8 * i)) & 0xffU;
            hash *= 1099511628211ULL;
        }
    };
    const auto occ = history_occupancy(spec, pi, cap);
    const int A = spec.num_actions;
    for (int h = 1; h <= spec.horizon; ++h) {
        const std::uint64_t nodes = occ[h].size() / A;
        for (std::uint64_t node = 0; node < nodes; ++node) {
            double reach = 0.0;
            for (int a = 0; a < A; ++a) reach += occ[h][node * A + a];
            if (reach == 0.0) continue;
            mix(static_cast<std::uint64_t>(h));
            mix(node);
            if (pi.is_stochastic()) {
                for (double p : pi.dist[h][node]) {
                    std::uint64_t bits;
                    std::memcpy(&bits, &p, sizeof bits);
                    mix(bits);
                }
            } else {
                mix(static_cast<std::uint64_t>(pi.action[h][node]));
            }
        }
    }
    return hash;
}

std::string policy_id_hex(std::uint64_t id) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id));
    return buf;
}

namespace {

struct PolicyEnumerator {
    const PormdpSpec& spec;
    std::uint64_t max_policies;
    HistoryPolicy current;
    std::vector<HistoryPolicy> out;

    void recurse(int h, const std::vector<std::uint64_t>& frontier) {
        if (h > spec.horizon) {
            if (out.size() >= max_policies)
                throw SizeError("more than " + std::to_string(max_policies) + " distinct deterministic policies");
            out.push_back(current);
            return;
        }
        const int A = spec.num_actions, S = spec.num_states;
        std::vector<int> choice(frontier.size(), 0);
        while (true) {
            std::vector<std::uint64_t> next;
            for (std::size_t i = 0; i < frontier.size(); ++i) {
                current.action[h][frontier[i]] = choice[i];
                if (h == spec.horizon) continue;
                const std::uint64_t code = frontier[i] * A + choice[i];
                const int s = static_cast<int>(frontier[i] % S);
                for (int s2 = 0; s2 < S; ++s2)
                    if (spec.P(s, choice[i], s2) > 0.0) next.push_back(code * S + s2);
            }
            recurse(h + 1, next);
            // Odometer increment over the joint choice at this step.
            std::size_t i = 0;
            while (i < choice.size() && ++choice[i] == A) choice[i++] = 0;
            if (i == choice.size()) break;
        }
        for (std::uint64_t node : frontier) current.action[h][node] = 0;
    }
};

}  // namespace

std::vector<HistoryPolicy> enumerate_deterministic_policies(const PormdpSpec& spec, std::uint64_t max_policies,
                                                            std::uint64_t cap) {
    PolicyEnumerator e{spec, max_policies, uniform_action_policy(spec, 0, cap), {}};
    e.recurse(1, {static_cast<std::uint64_t>(spec.initial_state)});
    return std::move(e.out);
}

std::vector<HistoryPolicy> enumerate_markovian_policies(const PormdpSpec& spec, std::uint64_t max_policies,
                                                        std::uint64_t cap) {
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    const double total = std::pow(static_cast<double>(A), static_cast<double>(S) * H);
    if (total > static_cast<double>(max_policies))
        throw SizeError("more than " + std::to_string(max_policies) + " Markovian policies");
    std::vector<std::vector<int>> act(H + 1, std::vector<int>(S, 0));
    std::vector<HistoryPolicy> out;
    while (true) {
        out.push_back(markov_policy(spec, act, cap));
        int h = 1, s = 0;
        while (h <= H) {
            if (++act[h][s] < A) break;
            act[h][s] = 0;
            if (++s == S) {
                s = 0;
                ++h;
            }
        }
        if (h > H) break;
    }
    return out;
}

}  // namespace porrl
