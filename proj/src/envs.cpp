#include "porrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace porrl {

HistoryRewards Environment::candidate_rewards(const std::vector<int>& idx) const {
    HistoryRewards f(spec.horizon + 1);
    for (int h : spec.feedback_steps) f[h] = classes[h].values.at(idx.at(h));
    return f;
}

HistoryRewards Environment::model_rewards(int m) const { return candidate_rewards(joint_models.at(m)); }

void Environment::validate() const {
    spec.validate();
    const auto H = static_cast<std::size_t>(spec.horizon);
    if (classes.size() != H + 1 || truth_index.size() != H + 1 || truth.size() != H + 1)
        throw SpecError("environment tables must have one row per step 0..H");
    for (int h : spec.feedback_steps) {
        const auto& cls = classes[h];
        if (cls.values.empty()) throw SpecError("empty function class at step " + std::to_string(h));
        for (const auto& row : cls.values)
            if (row.size() != history_count(spec, h)) throw SpecError("class member has the wrong domain");
        if (truth_index[h] < 0 || truth_index[h] >= static_cast<int>(cls.size()))
            throw SpecError("truth index out of range");
        if (cls.values[truth_index[h]] != truth[h]) throw SpecError("class does not realize the truth");
    }
    if (joint_models.empty()) throw SpecError("environment needs at least one joint model");
    for (const auto& m : joint_models) {
        if (m.size() != H + 1) throw SpecError("joint model must have one index per step 0..H");
        for (int h : spec.feedback_steps)
            if (m[h] < 0 || m[h] >= static_cast<int>(classes[h].size()))
                throw SpecError("joint model index out of range");
    }
    if (true_model < 0 || true_model >= static_cast<int>(joint_models.size()))
        throw SpecError("true model index out of range");
    for (int h : spec.feedback_steps)
        if (joint_models[true_model][h] != truth_index[h]) throw SpecError("true model disagrees with the truth");
}

namespace {

std::uint64_t ipow(std::uint64_t b, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

std::uint64_t prefix_code(const std::vector<int>& combo, int h, int A) {
    std::uint64_t c = 0;
    for (int i = 0; i < h; ++i) c = c * A + combo[i];
    return c;
}

void check_lock_args(int A, int H, double q, const std::vector<int>& combo) {
    if (A < 1 || H < 1) throw SpecError("lock needs A >= 1 and H >= 1");
    if (!(q > 0.0 && q <= 1.0)) throw SpecError("lock parameter q must lie in (0, 1]");
    if (combo.size() != static_cast<std::size_t>(H)) throw SpecError("lock combination must have length H");
    for (int a : combo)
        if (a < 0 || a >= A) throw SpecError("lock combination entry out of range");
}

}  // namespace

PormdpSpec make_combination_lock(int A, int H, double q, const std::vector<int>& combo, LockMode mode) {
    check_lock_args(A, H, q, combo);
    PormdpSpec spec;
    spec.num_states = 1;
    spec.num_actions = A;
    spec.horizon = H;
    spec.transitions.assign(A, 1.0);
    spec.initial_state = 0;
    if (mode == LockMode::dense) {
        for (int h = 1; h <= H; ++h) spec.feedback_steps.push_back(h);
    } else {
        spec.feedback_steps = {H};
    }
    std::uint64_t total = 0;
    std::vector<std::uint64_t> offset(H + 1, 0);
    for (int h = 1; h <= H; ++h) {
        offset[h] = total;
        total += history_count(spec, h);
    }
    spec.num_internal = static_cast<int>(total + 1);
    const int dead = spec.num_internal - 1;
    for (int h : spec.feedback_steps) {
        const std::uint64_t n = history_count(spec, h);
        const std::uint64_t live = prefix_code(combo, h, A);
        std::vector<int> dec(n, dead);
        dec[live] = static_cast<int>(offset[h] + live);
        spec.decoder.push_back(std::move(dec));
        std::vector<double> r(static_cast<std::size_t>(spec.num_internal) * A, q);
        for (int a = 0; a < A; ++a) r[static_cast<std::size_t>(dead) * A + a] = 0.0;
        spec.reward.push_back(std::move(r));
    }
    spec.reward_bound = 1.0;
    spec.activation = Activation::identity;
    spec.noise = NoiseKind::bernoulli;
    spec.validate();
    return spec;
}

Environment lock_environment(int A, int H, double q, const std::vector<int>& combo, LockMode mode,
                             bool include_null) {
    Environment env;
    env.name = "combination_lock";
    env.spec = make_combination_lock(A, H, q, combo, mode);
    env.truth = compose_rewards(env.spec);
    env.classes.resize(H + 1);
    env.truth_index.assign(H + 1, -1);
    for (int h : env.spec.feedback_steps) {
        const std::uint64_t n = history_count(env.spec, h);
        auto& cls = env.classes[h];
        cls.step = h;
        for (std::uint64_t c = 0; c < n; ++c) {
            std::vector<double> row(n, 0.0);
            row[c] = q;
            cls.values.push_back(std::move(row));
        }
        if (include_null) cls.values.emplace_back(n, 0.0);
        env.truth_index[h] = static_cast<int>(prefix_code(combo, h, A));
    }
    const std::uint64_t combos = ipow(A, H);
    for (std::uint64_t c = 0; c < combos; ++c) {
        std::vector<int> m(H + 1, -1);
        for (int h : env.spec.feedback_steps) m[h] = static_cast<int>(c / ipow(A, H - h));
        env.joint_models.push_back(std::move(m));
    }
    if (include_null) {
        std::vector<int> m(H + 1, -1);
        for (int h : env.spec.feedback_steps) m[h] = static_cast<int>(history_count(env.spec, h));
        env.joint_models.push_back(std::move(m));
    }
    env.true_model = static_cast<int>(prefix_code(combo, H, A));
    env.validate();
    return env;
}

PormdpSpec spec_from_reward_tables(const PormdpSpec& shape, const HistoryRewards& f) {
    PormdpSpec spec = shape;
    std::vector<double> values;
    for (int h : shape.feedback_steps) values.insert(values.end(), f.at(h).begin(), f.at(h).end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.empty()) values.push_back(0.0);
    std::map<double, int> index;
    for (std::size_t i = 0; i < values.size(); ++i) index[values[i]] = static_cast<int>(i);

    spec.num_internal = static_cast<int>(values.size());
    spec.decoder.clear();
    spec.reward.clear();
    double bound = 0.0;
    for (double v : values) bound = std::max(bound, std::abs(v));
    spec.reward_bound = bound > 0.0 ? bound : 1.0;
    const int S = spec.num_states, A = spec.num_actions, U = spec.num_internal;
    for (int h : shape.feedback_steps) {
        if (f[h].size() != history_count(spec, h)) throw SpecError("reward table has the wrong domain size");
        std::vector<int> dec(f[h].size());
        for (std::size_t c = 0; c < f[h].size(); ++c) dec[c] = index.at(f[h][c]);
        spec.decoder.push_back(std::move(dec));
        std::vector<double> r(static_cast<std::size_t>(S) * U * A);
        for (int s = 0; s < S; ++s)
            for (int u = 0; u < U; ++u)
                for (int a = 0; a < A; ++a) r[(static_cast<std::size_t>(s) * U + u) * A + a] = values[u];
        spec.reward.push_back(std::move(r));
    }
    spec.validate();
    return spec;
}

namespace {

std::vector<double> linear_values(int S, int A, int H, const std::vector<std::vector<double>>& features,
                                  const std::vector<double>& w) {
    std::uint64_t n = 1;
    for (int h = 0; h < H; ++h) n *= static_cast<std::uint64_t>(S) * A;
    if (features.size() != n) throw SpecError("feature map must list one vector per full-length history");
    std::vector<double> out(n);
    for (std::uint64_t c = 0; c < n; ++c) {
        if (features[c].size() != w.size()) throw SpecError("feature dimension does not match the weight vector");
        double v = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) v += features[c][i] * w[i];
        out[c] = v;
    }
    return out;
}

PormdpSpec linear_shape(int S, int A, int H, const std::vector<double>& transitions, int initial_state,
                        NoiseKind noise, double noise_scale) {
    PormdpSpec shape;
    shape.num_states = S;
    shape.num_actions = A;
    shape.horizon = H;
    shape.feedback_steps = {H};
    shape.transitions = transitions;
    shape.initial_state = initial_state;
    shape.noise = noise;
    if (noise == NoiseKind::gaussian) shape.noise_scale = {noise_scale};
    return shape;
}

}  // namespace

PormdpSpec make_linear_reward_env(int S, int A, int H, const std::vector<std::vector<double>>& features,
                                  const std::vector<double>& weights, const std::vector<double>& transitions,
                                  int initial_state, NoiseKind noise, double noise_scale) {
    if (S < 1 || A < 1 || H < 1) throw SpecError("linear env needs positive S, A, H");
    HistoryRewards f(H + 1);
    f[H] = linear_values(S, A, H, features, weights);
    return spec_from_reward_tables(linear_shape(S, A, H, transitions, initial_state, noise, noise_scale), f);
}

Environment linear_environment(int S, int A, int H, const std::vector<std::vector<double>>& features,
                               const std::vector<double>& weights, const std::vector<double>& transitions,
                               std::vector<std::vector<double>> candidate_weights, int initial_state,
                               NoiseKind noise, double noise_scale) {
    Environment env;
    env.name = "linear_reward";
    env.spec = make_linear_reward_env(S, A, H, features, weights, transitions, initial_state, noise, noise_scale);
    env.truth = compose_rewards(env.spec);
    env.classes.resize(H + 1);
    env.truth_index.assign(H + 1, -1);
    auto it = std::find(candidate_weights.begin(), candidate_weights.end(), weights);
    if (it == candidate_weights.end()) {
        candidate_weights.push_back(weights);
        it = candidate_weights.end() - 1;
    }
    env.truth_index[H] = static_cast<int>(it - candidate_weights.begin());
    env.classes[H].step = H;
    for (const auto& w : candidate_weights) env.classes[H].values.push_back(linear_values(S, A, H, features, w));
    // The truth row must match the composed table bit for bit.
    env.classes[H].values[env.truth_index[H]] = env.truth[H];
    for (std::size_t i = 0; i < candidate_weights.size(); ++i) {
        std::vector<int> m(H + 1, -1);
        m[H] = static_cast<int>(i);
        env.joint_models.push_back(std::move(m));
    }
    env.true_model = env.truth_index[H];
    env.validate();
    return env;
}

bool in_trap_set(const PormdpSpec& spec, std::uint64_t code) {
    const auto steps = decode_history(spec, spec.horizon, code);
    bool seen_second = false;
    for (auto [s, a] : steps) {
        seen_second = seen_second || s == 1;
        if (a != (seen_second ? 0 : 1)) return false;
    }
    return true;
}

namespace {

std::vector<std::vector<double>> trap_features(const PormdpSpec& shape) {
    const std::uint64_t n = history_count(shape, shape.horizon);
    std::vector<std::vector<double>> phi(n);
    for (std::uint64_t c = 0; c < n; ++c) phi[c] = {in_trap_set(shape, c) ? 1.0 : 0.0};
    return phi;
}

PormdpSpec trap_shape(int H) {
    if (H < 3) throw SpecError("markovian trap needs H >= 3");
    PormdpSpec shape;
    shape.num_states = 2;
    shape.num_actions = 2;
    shape.horizon = H;
    shape.transitions.assign(8, 0.5);
    return shape;
}

}  // namespace

PormdpSpec make_markovian_trap(int H) {
    const PormdpSpec shape = trap_shape(H);
    return make_linear_reward_env(2, 2, H, trap_features(shape), {1.0}, shape.transitions);
}

Environment trap_environment(int H) {
    const PormdpSpec shape = trap_shape(H);
    Environment env = linear_environment(2, 2, H, trap_features(shape), {1.0}, shape.transitions, {{0.0}, {1.0}});
    env.name = "markovian_trap";
    return env;
}

StochasticFixture make_stochastic_internal_env(std::uint64_t seed) {
    constexpr int S = 2, A = 2, H = 3, U = 2;
    constexpr double p_one = 0.3;
    Rng rng(seed);
    PormdpSpec shape;
    shape.num_states = S;
    shape.num_actions = A;
    shape.horizon = H;
    shape.feedback_steps = {1, 2, 3};
    shape.transitions.resize(S * A * S);
    for (int sa = 0; sa < S * A; ++sa) {
        const double x = 0.1 + 0.8 * rng.uniform();
        shape.transitions[sa * S] = x;
        shape.transitions[sa * S + 1] = 1.0 - x;
    }
    StochasticFixture out;
    out.w.num_internal = U;
    HistoryRewards marginal(H + 1);
    for (int h : shape.feedback_steps) {
        std::vector<double> r(S * U * A);
        for (double& x : r) x = rng.uniform();
        const std::uint64_t n = history_count(shape, h);
        out.w.w.emplace_back(n, std::vector<double>{1.0 - p_one, p_one});
        marginal[h].resize(n);
        for (std::uint64_t c = 0; c < n; ++c) {
            const int s = code_state(shape, c), a = code_action(shape, c);
            marginal[h][c] = (1.0 - p_one) * r[(s * U + 0) * A + a] + p_one * r[(s * U + 1) * A + a];
        }
        out.w.reward.push_back(std::move(r));
    }
    out.spec = spec_from_reward_tables(shape, marginal);
    return out;
}

Environment environment_from_spec(const PormdpSpec& spec, const std::string& name) {
    spec.validate();
    Environment env;
    env.name = name;
    env.spec = spec;
    env.truth = compose_rewards(spec);
    env.classes.resize(spec.horizon + 1);
    env.truth_index.assign(spec.horizon + 1, -1);
    std::vector<int> truth_model(spec.horizon + 1, -1), zero_model(spec.horizon + 1, -1);
    for (int h : spec.feedback_steps) {
        env.classes[h].step = h;
        env.classes[h].values = {env.truth[h], std::vector<double>(env.truth[h].size(), 0.0)};
        env.truth_index[h] = 0;
        truth_model[h] = 0;
        zero_model[h] = 1;
    }
    env.joint_models = {truth_model, zero_model};
    env.true_model = 0;
    env.validate();
    return env;
}

}  // namespace porrl
