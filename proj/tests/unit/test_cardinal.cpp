#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "porrl/cardinal.hpp"
#include "test_support.hpp"

using namespace porrl;
using namespace porrl::testing;

namespace {

CardinalParams unit_params(double scale = 1.0) {
    CardinalParams p;
    p.bonus_scale = scale;
    return p;
}

/// Best value of Σ p·v over a fine grid of the 3-simplex restricted to the L1 ball.
double grid_row_optimum(const std::vector<double>& row, const std::vector<double>& v, double radius) {
    const int n = 200;
    double best = -1e300;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            const double p[3] = {double(i) / n, double(j) / n, double(n - i - j) / n};
            double l1 = 0.0, val = 0.0;
            for (int k = 0; k < 3; ++k) {
                l1 += std::abs(p[k] - row[k]);
                val += p[k] * v[k];
            }
            if (l1 <= radius + 1e-12) best = std::max(best, val);
        }
    return best;
}

int first_optimal_episode(const RegretLog& log) {
    for (const auto& e : log.entries)
        if (e.regret_inc <= 1e-12) return e.episode;
    return static_cast<int>(log.entries.size()) + 1;
}

}  // namespace

TEST_CASE("optimistic row stays in the ball and beats a grid search") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> row(3), v(3);
        double sum = 0.0;
        for (double& x : row) sum += (x = rng.uniform() + 0.01);
        for (double& x : row) x /= sum;
        for (double& x : v) x = std::round(rng.uniform() * 4) / 4;  // frequent ties
        const double radius = 2.0 * rng.uniform();
        const auto p = optimistic_row(row, v, radius);
        double l1 = 0.0, total = 0.0, val = 0.0;
        for (int k = 0; k < 3; ++k) {
            CHECK(p[k] >= -1e-15);
            l1 += std::abs(p[k] - row[k]);
            total += p[k];
            val += p[k] * v[k];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(l1 <= radius + 1e-12);
        CHECK(val >= grid_row_optimum(row, v, radius) - 1e-12);
    }
}

TEST_CASE("extended value iteration with zero radii equals backward induction") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto spec = random_spec(seed, 2 + seed % 2, 2, 3);
        const auto f = compose_rewards(spec);
        const std::vector<double> radii(spec.num_states * spec.num_actions, 0.0);
        const auto evi = extended_value_iteration(spec, spec.transitions, radii, f);
        const auto opt = optimal_policy(spec, f);
        CHECK(std::abs(evi.value - opt.value) <= 1e-10);
        CHECK(evi.policy.action == opt.policy.action);
    }
}

TEST_CASE("extended value iteration on a two-state toy") {
    // Two states, two actions, H = 2; feedback only at h = 2 and worth 1 in state 1.
    PormdpSpec shape;
    shape.num_states = 2;
    shape.num_actions = 2;
    shape.horizon = 2;
    shape.feedback_steps = {2};
    shape.transitions.assign(8, 0.5);
    HistoryRewards f(3);
    f[2].resize(16);
    for (std::uint64_t c = 0; c < 16; ++c) f[2][c] = code_state(shape, c) == 1 ? 1.0 : 0.0;
    const auto spec = spec_from_reward_tables(shape, f);
    const std::vector<double> phat(8, 0.5);
    CHECK(extended_value_iteration(spec, phat, std::vector<double>(4, 0.0), f).value == doctest::Approx(0.5));
    CHECK(extended_value_iteration(spec, phat, std::vector<double>(4, 0.4), f).value == doctest::Approx(0.7));
    CHECK(extended_value_iteration(spec, phat, std::vector<double>(4, 2.0), f).value == doctest::Approx(1.0));
    // A full-radius ball at a single pair: only that action reaches state 1 for sure.
    std::vector<double> one(4, 0.0);
    one[spec.initial_state * 2 + 1] = 2.0;
    const auto r = extended_value_iteration(spec, phat, one, f);
    CHECK(r.value == doctest::Approx(1.0));
    CHECK(r.policy.action[1][spec.initial_state] == 1);
    CHECK_THROWS_AS(extended_value_iteration(spec, phat, std::vector<double>(4, 2.5), f), SpecError);
    CHECK_THROWS_AS(extended_value_iteration(spec, phat, std::vector<double>(3, 0.0), f), SpecError);
}

TEST_CASE("optimistic value dominates every kernel in the ball") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto spec = random_spec(100 + seed, 3, 2, 3);
        const auto f = compose_rewards(spec);
        Rng rng(seed);
        std::vector<double> radii(6);
        for (double& r : radii) r = 0.2 + rng.uniform();
        // Perturb the true kernel inside each ball to obtain the estimate.
        std::vector<double> phat = spec.transitions;
        for (int sa = 0; sa < 6; ++sa) {
            auto* row = &phat[sa * 3];
            const double move = std::min(row[0], radii[sa] / 2.0) * rng.uniform();
            row[0] -= move;
            row[1] += move;
        }
        const auto evi = extended_value_iteration(spec, phat, radii, f);
        CHECK(evi.value >= optimal_policy(spec, f).value - 1e-12);
        auto on_hat = spec;
        on_hat.transitions = phat;
        CHECK(evi.value >= policy_value(on_hat, f, evi.policy) - 1e-12);
    }
}

TEST_CASE("Q-class tuples satisfy their Bellman equations") {
    const auto env = lock_environment(2, 3, 0.8, {1, 0, 1}, LockMode::dense);
    const auto qc = build_qclass(env);
    CHECK(qc.size() == env.joint_models.size());
    CHECK(bellman_residual(env, qc) <= 1e-9);
    for (std::size_t m = 0; m < qc.size(); ++m)
        CHECK(qc.vmax[m][1][env.spec.initial_state] ==
              doctest::Approx(oracle_optimum(env.spec, env.model_rewards(static_cast<int>(m)))).epsilon(1e-12));
    const auto trap = trap_environment(4);
    CHECK(bellman_residual(trap, build_qclass(trap)) <= 1e-9);
}

TEST_CASE("GOLF confidence set") {
    GolfLosses losses;
    losses.horizon = 2;
    losses.num_tuples = 3;
    losses.loss.assign(3, std::vector<double>(9, 0.0));
    // Step 1: tuple 0 trails the best auxiliary (2) on its own target by 5.
    losses.loss[1] = {5, 0, 0, 1, 0, 0, 0, 0, 0};
    // Step 2: tuple 2 trails the best auxiliary (1) on its own target by 4.
    losses.loss[2] = {0, 0, 1, 0, 0, 0, 0, 0, 4};
    CHECK(golf_confidence_set(losses, 1e9) == std::vector<bool>{true, true, true});
    CHECK(golf_confidence_set(losses, 0.0) == std::vector<bool>{false, true, false});
    CHECK(golf_confidence_set(losses, 3.9) == std::vector<bool>{false, true, false});
    CHECK(golf_confidence_set(losses, 4.0) == std::vector<bool>{false, true, true});
    CHECK(golf_confidence_set(losses, 5.0) == std::vector<bool>{true, true, true});
}

TEST_CASE("GOLF eliminates tuples contradicted by noiseless data") {
    const std::vector<int> combo{1, 0, 1};
    const auto env = lock_environment(2, 3, 1.0, combo, LockMode::dense);
    Golf golf(env, unit_params(1e-9), 10);
    const auto pi = optimal_policy(env.spec, env.truth).policy;
    Rng rng(1);
    for (int i = 0; i < 3; ++i) golf.update(simulate_episode(env.spec, env.truth, pi, rng));
    const auto mask = golf_confidence_set(golf.losses(), 1e-9);
    // Brute force: a tuple survives iff it predicts the observed feedback (all ones) along the path.
    for (std::size_t m = 0; m < mask.size(); ++m) {
        const auto f = env.model_rewards(static_cast<int>(m));
        bool agrees = true;
        std::uint64_t code = 0;
        for (int h = 1; h <= 3; ++h) {
            code = code * 2 + combo[h - 1];
            agrees = agrees && f[h][code] == 1.0;
        }
        CHECK(mask[m] == agrees);
    }
    CHECK(mask[env.true_model]);
    CHECK(std::count(mask.begin(), mask.end(), true) == 1);
}

TEST_CASE("GOLF action selection") {
    QClass qc;
    qc.q = {{{}, {0.1, 0.9}}, {{}, {0.7, 0.2}}};
    qc.vmax = {{{}, {0.9}}, {{}, {0.7}}};
    CHECK(golf_act({true, false}, qc, 1, 0, 2) == 1);
    CHECK(golf_act({false, true}, qc, 1, 0, 2) == 0);
    CHECK(golf_act({true, true}, qc, 1, 0, 2) == 1);
    CHECK(golf_act({false, false}, qc, 1, 0, 2) == 1);  // falls back to the full class
    QClass tie;
    tie.q = {{{}, {0.5, 0.5}}};
    CHECK(golf_act({true}, tie, 1, 0, 2) == 0);
    QClass agree;
    agree.q = {{{}, {0.1, 0.3}}, {{}, {0.0, 0.8}}, {{}, {0.2, 0.25}}};
    for (int mask = 1; mask < 8; ++mask)
        CHECK(golf_act({bool(mask & 1), bool(mask & 2), bool(mask & 4)}, agree, 1, 0, 2) == 1);
}

TEST_CASE("first-episode plans are optimistic") {
    const auto env = lock_environment(2, 3, 0.8, {0, 1, 1}, LockMode::dense);
    const double vstar = optimal_policy(env.spec, env.truth).value;
    for (const auto& name : cardinal_algorithm_names()) {
        auto learner = make_cardinal_learner(parse_cardinal_algorithm(name), env, unit_params(), 100);
        const auto plan = learner->plan(1);
        CHECK(plan.optimistic_value >= vstar - 1e-12);
    }
    CHECK_THROWS_AS(parse_cardinal_algorithm("ucrl3"), SpecError);
    for (const auto& name : cardinal_algorithm_names()) CHECK(to_string(parse_cardinal_algorithm(name)) == name);
}

TEST_CASE("POR-UCRL at t = 1 uses the full class and radius 2") {
    const auto env = lock_environment(2, 3, 0.8, {0, 1, 1}, LockMode::dense);
    PorUcrl ucrl(env, unit_params(), 50);
    const auto plan = ucrl.plan(1);
    for (int h = 1; h <= 3; ++h)
        for (bool b : ucrl.masks()[h]) CHECK(b);
    CHECK(plan.optimistic_value == doctest::Approx(3 * 0.8));
    CHECK(plan.truth_in_cf == 1);
    CHECK(plan.truth_in_cp == 1);
}

TEST_CASE("POR-UCRL locks onto the combination under noiseless feedback") {
    const std::vector<int> combo{1, 0, 1};
    const auto env = lock_environment(2, 3, 1.0, combo, LockMode::dense);
    const auto log = run_cardinal(CardinalAlgorithm::por_ucrl, env, unit_params(0.1), 500, 9);
    REQUIRE(log.entries.size() == 500);
    CHECK(log.entries.back().regret_inc == doctest::Approx(0.0).epsilon(1e-12));
    PorUcrl ucrl(env, unit_params(0.1), 500);
    Rng rng(9);
    for (int t = 1; t <= 500; ++t) {
        const auto plan = ucrl.plan(t);
        ucrl.update(simulate_episode(env.spec, env.truth, plan.policy, rng));
    }
    const auto plan = ucrl.plan(501);
    std::uint64_t node = env.spec.initial_state;
    for (int h = 1; h <= 3; ++h) {
        CHECK(plan.policy.action[h][node] == combo[h - 1]);
        node = (node * 2 + combo[h - 1]) * 1 + 0;
    }
}

TEST_CASE("POR-UCBVI with exact inputs and vanishing bonuses recovers the optimum") {
    const auto env = lock_environment(2, 3, 0.8, {1, 1, 0}, LockMode::dense);
    PorUcbvi ucbvi(env, unit_params(1e-9), 10);
    // At t = 1 every ξ is clipped at 2 so the terminal bonus is z·min(4, 2·(H−1)).
    const auto table = ucbvi.transition_bonus_table(1);
    const double z = z_of(env.spec.reward_bound * 3, 1e-9);
    for (double x : table) CHECK(x == doctest::Approx(z * 4.0));
    const auto plan = ucbvi.plan(1);
    // Full class: f̂ + γ is the classwise max, so every combination looks optimal; lowest action wins.
    CHECK(plan.optimistic_value >= 2.4);
    CHECK(plan.truth_in_cf == 1);
}

TEST_CASE("run_cardinal bookkeeping") {
    const auto env = lock_environment(2, 3, 0.8, {0, 0, 1}, LockMode::dense);
    CHECK(run_cardinal(CardinalAlgorithm::por_ucrl, env, unit_params(), 0, 1).entries.empty());
    for (const auto& name : cardinal_algorithm_names()) {
        const auto algo = parse_cardinal_algorithm(name);
        const auto a = run_cardinal(algo, env, unit_params(0.1), 60, 4);
        const auto b = run_cardinal(algo, env, unit_params(0.1), 60, 4);
        REQUIRE(a.entries.size() == 60);
        CHECK(a.optimal_value == doctest::Approx(2.4));
        double prev = 0.0;
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            const auto& e = a.entries[i];
            CHECK(e.episode == static_cast<int>(i) + 1);
            CHECK(e.regret_inc >= -1e-9);
            CHECK(e.cum_regret >= prev - 1e-9);
            prev = e.cum_regret;
            CHECK(e.policy_id == b.entries[i].policy_id);
            CHECK(e.cum_regret == b.entries[i].cum_regret);
        }
    }
    CHECK_THROWS_AS(run_cardinal(CardinalAlgorithm::golf, env, unit_params(), -1, 1), SpecError);
    CardinalParams bad;
    bad.delta = 0.0;
    CHECK_THROWS_AS(run_cardinal(CardinalAlgorithm::por_ucrl, env, bad, 5, 1), SpecError);
}

TEST_CASE("flags for algorithms without confidence sets") {
    const auto env = lock_environment(2, 2, 0.8, {0, 1}, LockMode::dense);
    const auto log = run_cardinal(CardinalAlgorithm::markovian_ucbvi_baseline, env, unit_params(), 5, 1);
    for (const auto& e : log.entries) {
        CHECK(e.truth_in_cf == kFlagNotApplicable);
        CHECK(e.truth_in_cp == kFlagNotApplicable);
    }
    const auto naive = run_cardinal(CardinalAlgorithm::naive_history_ucrl, env, unit_params(), 5, 1);
    for (const auto& e : naive.entries) {
        CHECK(e.truth_in_cf == kFlagNotApplicable);
        CHECK(e.truth_in_cp != kFlagNotApplicable);
    }
}

TEST_CASE("Markovian baseline cannot solve the trap") {
    const auto env = trap_environment(4);
    const auto log = run_cardinal(CardinalAlgorithm::markovian_ucbvi_baseline, env, unit_params(), 200, 3);
    CHECK(log.optimal_value == doctest::Approx(1.0));
    for (const auto& e : log.entries) CHECK(e.regret_inc >= 0.25 - 1e-12);
    CHECK(log.entries.back().cum_regret >= 0.2 * 200);
}

TEST_CASE("regret to PAC") {
    const auto env = lock_environment(2, 2, 0.8, {1, 0}, LockMode::dense);
    const auto log = run_cardinal(CardinalAlgorithm::por_ucrl, env, unit_params(0.1), 40, 2, true);
    REQUIRE(log.policies.size() == 40);
    const auto a = regret_to_pac(log, env.spec, env.truth, 77);
    const auto b = regret_to_pac(log, env.spec, env.truth, 77);
    CHECK(a.index == b.index);
    CHECK(a.gap == b.gap);
    CHECK(a.gap == doctest::Approx(log.entries[a.index].regret_inc).epsilon(1e-12));
    CHECK_THROWS_AS(regret_to_pac(run_cardinal(CardinalAlgorithm::por_ucrl, env, unit_params(), 5, 2), env.spec,
                                  env.truth, 1),
                    SpecError);
    // A one-action lock has a single policy, so the log carries zero regret.
    const auto flat = lock_environment(1, 2, 0.8, {0, 0}, LockMode::dense);
    const auto zero = run_cardinal(CardinalAlgorithm::por_ucrl, flat, unit_params(), 10, 1, true);
    CHECK(zero.entries.back().cum_regret == 0.0);
    for (std::uint64_t s = 0; s < 10; ++s) CHECK(regret_to_pac(zero, flat.spec, flat.truth, s).gap == 0.0);
    CHECK(pac_gap_bound(10.0, 100, 1.0, 2, 0.1) ==
          doctest::Approx(0.1 + 16.0 * std::sqrt(std::log(10.0) / 100.0)));
}

TEST_SUITE("ordinal") {
TEST_CASE("GOLF reaches the optimum no later than POR-UCRL on a deeper lock") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        std::vector<int> combo(4);
        for (int& c : combo) c = static_cast<int>(rng.below(2));
        const auto env = lock_environment(2, 4, 0.8, combo, LockMode::dense);
        const int T = 400;
        const auto golf = run_cardinal(CardinalAlgorithm::golf, env, unit_params(0.1), T, seed);
        const auto ucrl = run_cardinal(CardinalAlgorithm::por_ucrl, env, unit_params(0.1), T, seed);
        wins += first_optimal_episode(golf) <= first_optimal_episode(ucrl);
    }
    MESSAGE("GOLF first-optimal no later than POR-UCRL in " << wins << "/100 seeds");
    CHECK(wins >= 70);
}
}  // TEST_SUITE
