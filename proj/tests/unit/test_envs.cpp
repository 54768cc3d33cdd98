#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "porrl/core.hpp"
#include "porrl/envs.hpp"
#include "test_support.hpp"

using namespace porrl;
using namespace porrl::testing;

TEST_CASE("combination lock values") {
    const auto dense = make_combination_lock(2, 3, 0.8, {1, 0, 1}, LockMode::dense);
    CHECK(dense.feedback_steps == std::vector<int>{1, 2, 3});
    CHECK(dense.num_internal == 2 + 4 + 8 + 1);
    CHECK(optimal_policy(dense, compose_rewards(dense)).value == doctest::Approx(2.4).epsilon(1e-15));

    const auto sparse = make_combination_lock(2, 3, 0.8, {1, 0, 1}, LockMode::sparse);
    CHECK(sparse.feedback_steps == std::vector<int>{3});
    CHECK(optimal_policy(sparse, compose_rewards(sparse)).value == doctest::Approx(0.8).epsilon(1e-15));

    const auto single = make_combination_lock(1, 4, 0.3, {0, 0, 0, 0}, LockMode::dense);
    const auto f = compose_rewards(single);
    for (const auto& pi : enumerate_deterministic_policies(single))
        CHECK(policy_value(single, f, pi) == doctest::Approx(0.3 * 4).epsilon(1e-15));
}

TEST_CASE("combination lock argument checks") {
    CHECK_THROWS_AS(make_combination_lock(2, 3, 0.8, {1, 0, 2}, LockMode::dense), SpecError);
    CHECK_THROWS_AS(make_combination_lock(2, 3, 0.8, {1, 0}, LockMode::dense), SpecError);
    CHECK_THROWS_AS(make_combination_lock(2, 3, 0.0, {1, 0, 1}, LockMode::dense), SpecError);
    CHECK_THROWS_AS(make_combination_lock(2, 3, 1.5, {1, 0, 1}, LockMode::dense), SpecError);
}

TEST_CASE("a wrong lock digit zeroes every later reward") {
    const std::vector<int> combo{2, 0, 1};
    const auto lock = make_combination_lock(3, 3, 0.7, combo, LockMode::dense);
    const auto f = compose_rewards(lock);
    for (std::uint64_t code = 0; code < history_count(lock, 3); ++code) {
        const auto steps = decode_history(lock, 3, code);
        int first_wrong = 4;
        for (int i = 0; i < 3; ++i)
            if (steps[i].second != combo[i]) {
                first_wrong = i + 1;
                break;
            }
        for (int h = 1; h <= 3; ++h) {
            const Steps prefix(steps.begin(), steps.begin() + h);
            const double v = f[h][oracle_code(lock, prefix)];
            CHECK(v == (h < first_wrong ? 0.7 : 0.0));
        }
    }
}

TEST_CASE("lock environment classes") {
    const auto env = lock_environment(2, 3, 0.8, {1, 0, 1}, LockMode::dense);
    CHECK(env.classes[1].size() == 3);
    CHECK(env.classes[3].size() == 9);
    CHECK(env.joint_models.size() == 9);
    CHECK(env.truth_index[3] == 5);
    CHECK(env.true_model == 5);
    CHECK(env.model_rewards(env.true_model) == env.truth);
    const auto bare = lock_environment(2, 3, 0.8, {1, 0, 1}, LockMode::sparse, false);
    CHECK(bare.classes[1].size() == 0);
    CHECK(bare.classes[3].size() == 8);
    CHECK(bare.joint_models.size() == 8);
    // Every joint model is itself a lock whose optimum is its own combination.
    for (std::size_t m = 0; m < 8; ++m)
        CHECK(optimal_policy(env.spec, env.model_rewards(static_cast<int>(m))).value == doctest::Approx(2.4));
}

TEST_CASE("linear reward env") {
    const int S = 2, A = 2, H = 2;
    const auto shape = random_spec(3, S, A, H, {2});
    const std::uint64_t n = history_count(shape, H);
    CHECK(n == 16);

    std::vector<std::vector<double>> zero_features(n, std::vector<double>{1.0, 2.0});
    const auto flat = make_linear_reward_env(S, A, H, zero_features, {0.0, 0.0}, shape.transitions);
    const auto f0 = compose_rewards(flat);
    for (const auto& pi : enumerate_deterministic_policies(flat))
        CHECK(policy_value(flat, f0, pi) == 0.0);

    Rng rng(8);
    std::vector<std::vector<double>> phi(n, std::vector<double>(3));
    for (auto& row : phi)
        for (double& x : row) x = rng.uniform() / 3.0;
    const auto spec = make_linear_reward_env(S, A, H, phi, {0.5, 1.0, 0.25}, shape.transitions);
    const auto f = compose_rewards(spec);
    for (std::uint64_t c = 0; c < n; ++c)
        CHECK(f[2][c] == doctest::Approx(0.5 * phi[c][0] + phi[c][1] + 0.25 * phi[c][2]).epsilon(1e-15));
    double best = -1.0;
    for (const auto& pi : enumerate_deterministic_policies(spec)) best = std::max(best, policy_value(spec, f, pi));
    CHECK(optimal_policy(spec, f).value == doctest::Approx(best).epsilon(1e-12));

    CHECK_THROWS_AS(make_linear_reward_env(S, A, H, phi, {1.0}, shape.transitions), SpecError);
    CHECK_THROWS_AS(make_linear_reward_env(S, A, H, {{1.0}}, {1.0}, shape.transitions), SpecError);

    const auto env = linear_environment(S, A, H, phi, {0.5, 1.0, 0.25}, shape.transitions, {{0, 0, 0}});
    CHECK(env.classes[2].size() == 2);
    CHECK(env.truth_index[2] == 1);
}

TEST_CASE("markovian trap") {
    const auto trap = make_markovian_trap(4);
    const auto f = compose_rewards(trap);
    CHECK(trap.num_states == 2);
    CHECK(trap.feedback_steps == std::vector<int>{4});
    CHECK(optimal_policy(trap, f).value == 1.0);

    // Exhaustive search over the 256 deterministic time-dependent Markovian policies.
    const auto markov = enumerate_markovian_policies(trap);
    CHECK(markov.size() == 256);
    double best = 0.0;
    for (const auto& pi : markov) best = std::max(best, policy_value(trap, f, pi));
    CHECK(best <= 0.75 + 1e-12);
    CHECK(best == doctest::Approx(0.75).epsilon(1e-15));

    // "Always a_1" by explicit trajectory enumeration.
    const auto all_first = markov_policy(trap, {{}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
    double oracle = 0.0;
    std::function<void(Steps&, int, double)> walk = [&](Steps& prefix, int s, double p) {
        prefix.emplace_back(s, 0);
        if (prefix.size() == 4) {
            bool seen = false, ok = true;
            for (auto [st, a] : prefix) {
                seen = seen || st == 1;
                ok = ok && a == (seen ? 0 : 1);
            }
            if (ok) oracle += p;
        } else {
            walk(prefix, 0, p * 0.5);
            walk(prefix, 1, p * 0.5);
        }
        prefix.pop_back();
    };
    Steps prefix;
    walk(prefix, 0, 1.0);
    CHECK(policy_value(trap, f, all_first) == doctest::Approx(oracle).epsilon(1e-15));

    CHECK_THROWS_AS(make_markovian_trap(2), SpecError);
    const auto env = trap_environment(4);
    CHECK(env.classes[4].size() == 2);
}

TEST_CASE("stochastic internal fixture") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto fx = make_stochastic_internal_env(seed);
        CHECK_NOTHROW(fx.spec.validate());
        CHECK_NOTHROW(fx.w.validate(fx.spec));
        for (const auto& table : fx.w.w)
            for (const auto& row : table) CHECK(row[0] + row[1] == doctest::Approx(1.0).epsilon(1e-15));
        const auto again = make_stochastic_internal_env(seed);
        const auto pi = uniform_action_policy(fx.spec, 1);
        CHECK(policy_value(fx.spec, compose_rewards(fx.spec), pi) ==
              policy_value(again.spec, compose_rewards(again.spec), pi));
        // The baked table is the exact marginal of the generator.
        const auto f = compose_rewards(fx.spec);
        for (int k = 0; k < fx.spec.num_feedback(); ++k) {
            const int h = fx.spec.feedback_steps[k];
            for (std::uint64_t c = 0; c < f[h].size(); ++c) {
                const int s = code_state(fx.spec, c), a = code_action(fx.spec, c);
                const double m = 0.7 * fx.w.reward[k][(s * 2 + 0) * 2 + a] + 0.3 * fx.w.reward[k][(s * 2 + 1) * 2 + a];
                CHECK(f[h][c] == m);
            }
        }
    }
}

TEST_CASE("environment_from_spec wraps any spec") {
    const auto spec = random_spec(6, 2, 2, 2);
    const auto env = environment_from_spec(spec);
    CHECK_NOTHROW(env.validate());
    CHECK(env.joint_models.size() == 2);
    CHECK(env.model_rewards(0) == compose_rewards(spec));
}
