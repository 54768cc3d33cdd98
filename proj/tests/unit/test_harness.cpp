#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "porrl/harness.hpp"
#include "porrl/serialize.hpp"
#include "test_support.hpp"

using namespace porrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("porrl_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json lock_config(const fs::path& out, const std::string& algo = "por_ucrl") {
    return json{{"mode", "cardinal"},
                {"env", {{"name", "combination_lock"}, {"params", {{"A", 2}, {"H", 3}, {"q", 0.8}, {"combo", {1, 0, 1}}}}}},
                {"algorithm", {{"name", algo}, {"params", {{"delta", 0.1}, {"bonus_scale", 0.1}}}}},
                {"T", 60},
                {"seeds", {1, 2, 3}},
                {"output_dir", out.string()},
                {"workers", 3}};
}

std::vector<std::string> problems_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& field) {
    for (const auto& p : problems)
        if (p.rfind(field + ":", 0) == 0) return true;
    return false;
}

/// Independent least-squares slope on the upper half, written without the library helper.
double reference_slope(const std::vector<double>& t, const std::vector<double>& y) {
    double T = t.back();
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < T / 2 || y[i] <= 0) continue;
        double x = std::log(t[i]), v = std::log(y[i]);
        n += 1;
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("config errors list every offending field") {
    json doc = lock_config("/tmp/unused");
    doc["T"] = -4;
    doc["seeds"] = json::array();
    doc["algorithm"]["name"] = "no_such_algorithm";
    doc["algorithm"]["params"]["delta"] = 3.0;
    doc["colour"] = "blue";
    auto problems = problems_of(doc);
    CHECK(mentions(problems, "T"));
    CHECK(mentions(problems, "seeds"));
    CHECK(mentions(problems, "algorithm.name"));
    CHECK(mentions(problems, "algorithm.params.delta"));
    CHECK(mentions(problems, "colour"));
    CHECK(problems.size() == 5);
}

TEST_CASE("unknown keys are rejected at every level") {
    json doc = lock_config("/tmp/unused");
    doc["env"]["params"]["width"] = 3;
    CHECK(mentions(problems_of(doc), "env.params.width"));
    doc = lock_config("/tmp/unused");
    doc["algorithm"]["params"]["gamma"] = 0.9;
    CHECK(mentions(problems_of(doc), "algorithm.params.gamma"));
    doc = lock_config("/tmp/unused");
    doc["env"]["name"] = "mystery";
    CHECK(mentions(problems_of(doc), "env.name"));
    doc = lock_config("/tmp/unused");
    doc["env"]["params"]["combo"] = {0, 5, 0};
    CHECK(mentions(problems_of(doc), "env.params"));
    CHECK(problems_of(lock_config("/tmp/unused")).empty());
}

TEST_CASE("dueling configs validate activation and noise") {
    json doc = lock_config("/tmp/unused", "dueling_confidence");
    doc["mode"] = "dueling";
    CHECK(problems_of(doc).empty());
    doc["algorithm"]["params"]["duel_noise"] = "bernoulli";
    CHECK(mentions(problems_of(doc), "algorithm.params"));
    doc["algorithm"]["params"]["duel_activation"] = "logistic";
    CHECK(problems_of(doc).empty());
    doc["algorithm"]["params"]["golf_c"] = 1.0;
    CHECK(mentions(problems_of(doc), "algorithm.params.golf_c"));
}

TEST_CASE("three seeds give three CSVs and a manifest; reruns are byte-identical") {
    fs::path dir = fresh_dir("three_seeds");
    ExperimentConfig cfg = parse_config(lock_config(dir));
    json manifest = run_experiment(cfg);

    std::size_t csvs = 0;
    for (const auto& e : fs::directory_iterator(dir)) csvs += e.path().extension() == ".csv" ? 1 : 0;
    CHECK(csvs == 3);
    CHECK(fs::exists(dir / "manifest.json"));
    REQUIRE(manifest["runs"].size() == 3);
    for (const auto& r : manifest["runs"]) {
        CHECK(r["status"] == "ok");
        double cov = r["coverage"].get<double>();
        CHECK(cov >= 0.0);
        CHECK(cov <= 1.0);
    }
    CHECK(manifest["config"] == lock_config(dir));
    CHECK(manifest.contains("wall_time_seconds"));

    const std::string first = slurp(dir / "por_ucrl_seed2.csv");
    std::istringstream lines(first);
    std::string header, row;
    std::getline(lines, header);
    CHECK(header == "episode,policy_id,value,regret_inc,cum_regret,optimistic_value,truth_in_cf,truth_in_cp");
    std::size_t rows = 0;
    while (std::getline(lines, row)) ++rows;
    CHECK(rows == 60);

    cfg.workers = 1;
    run_experiment(cfg);
    CHECK(slurp(dir / "por_ucrl_seed2.csv") == first);
    fs::remove_all(dir);
}

TEST_CASE("manifest optimal value matches the planner") {
    fs::path dir = fresh_dir("vstar");
    json doc = lock_config(dir);
    doc["env"] = {{"name", "markovian_trap"}, {"params", {{"H", 4}}}};
    doc["algorithm"]["name"] = "markovian_ucbvi_baseline";
    doc["seeds"] = {5};
    ExperimentConfig cfg = parse_config(doc);
    json manifest = run_experiment(cfg);
    Environment env = trap_environment(4);
    CHECK(manifest["optimal_value"].get<double>() == optimal_policy(env.spec, env.truth).value);
    CHECK(manifest["optimal_value"].get<double>() == 1.0);
    fs::remove_all(dir);
}

TEST_CASE("custom spec documents round-trip through the env block") {
    PormdpSpec spec = testing::random_spec(17, 2, 2, 3);
    Environment env = make_environment("custom", json{{"spec", spec_to_json(spec)}});
    CHECK(optimal_policy(env.spec, env.truth).value == doctest::Approx(optimal_policy(spec, compose_rewards(spec)).value).epsilon(1e-12));
}

TEST_CASE("dims mode reports the lock dimension") {
    fs::path dir = fresh_dir("dims");
    json doc = {{"mode", "dims"},
                {"env", {{"name", "combination_lock"}, {"params", {{"A", 2}, {"H", 3}}}}},
                {"T", 10000},
                {"output_dir", dir.string()},
                {"dims", {{"alpha", 0.5}}}};
    json manifest = run_experiment(parse_config(doc));
    CHECK(manifest["runs"].empty());
    std::ifstream in(dir / "dims_report.json");
    json report = json::parse(in);
    CHECK(report["max"] == 2);
    CHECK(report["per_h_dims"].size() == 3);
    CHECK(report["budget_flag"] == false);
    CHECK(report["be"]["max"].get<int>() >= 6);
    CHECK(report["epsilon"].get<double>() == doctest::Approx(0.01));
    fs::remove_all(dir);
}

TEST_CASE("per-seed failures are isolated") {
    fs::path dir = fresh_dir("isolation");
    json doc = lock_config(dir, "dueling_confidence");
    doc["mode"] = "dueling";
    doc["seeds"] = {0, 1};
    doc["algorithm"]["params"]["max_policies"] = 1;   // universe too large: every run fails at runtime
    json manifest = run_experiment(parse_config(doc));
    for (const auto& r : manifest["runs"]) {
        CHECK(r["status"] == "failed");
        CHECK(!r["error"].get<std::string>().empty());
    }
    CHECK(manifest["summary"]["failed"] == 2);
    fs::remove_all(dir);
}

TEST_CASE("slope of an exactly linear log is one") {
    std::vector<double> t, cum;
    for (int i = 1; i <= 400; ++i) {
        t.push_back(i);
        cum.push_back(0.37 * i);
    }
    auto s = loglog_slope(t, cum);
    REQUIRE(s);
    CHECK(std::abs(*s - 1.0) <= 1e-6);

    std::vector<double> sq;
    for (double x : t) sq.push_back(2.0 * std::sqrt(x) + std::sin(x));
    CHECK(*loglog_slope(t, sq) == doctest::Approx(reference_slope(t, sq)).epsilon(1e-12));

    CHECK_FALSE(loglog_slope(t, std::vector<double>(t.size(), 0.0)));
    CHECK_FALSE(loglog_slope({}, {}));
}

TEST_CASE("mean and standard error") {
    MeanStderr m = mean_stderr({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(mean_stderr({7.0}).stderr_ == 0.0);
}

TEST_CASE("summarize aggregates per algorithm") {
    fs::path dir = fresh_dir("summarize");
    ExperimentConfig cfg = parse_config(lock_config(dir));
    run_experiment(cfg);

    // A synthetic zero-regret run and an exactly linear one.
    std::string zero = "episode,policy_id,value,regret_inc,cum_regret,optimistic_value,truth_in_cf,truth_in_cp\n";
    std::string linear = zero;
    for (int t = 1; t <= 50; ++t) {
        zero += std::to_string(t) + ",0000000000000000,1,0,0,1,-1,-1\n";
        linear += std::to_string(t) + ",0000000000000000,0.5,0.5," + std::to_string(0.5 * t) + ",1,1,0\n";
    }
    write_file_atomic(dir / "flat_seed0.csv", zero);
    write_file_atomic(dir / "line_seed4.csv", linear);

    json s = summarize(dir);
    const json& algos = s["algorithms"];
    REQUIRE(algos.contains("por_ucrl"));
    CHECK(algos["por_ucrl"]["runs"].size() == 3);
    CHECK(algos["por_ucrl"]["final_regret"]["n"] == 3);
    double cov = algos["por_ucrl"]["coverage"]["mean"].get<double>();
    CHECK(cov >= 0.0);
    CHECK(cov <= 1.0);

    CHECK(algos["flat"]["runs"][0]["slope"].is_null());
    CHECK(algos["flat"]["slope"].is_null());
    CHECK(algos["flat"]["coverage"].is_null());
    CHECK(std::abs(algos["line"]["runs"][0]["slope"].get<double>() - 1.0) <= 1e-6);
    CHECK(algos["line"]["runs"][0]["coverage"].get<double>() == 0.0);
    CHECK(algos["line"]["runs"][0]["pac_gap"].get<double>() == 0.5);

    // Manifest and summary agree on per-run statistics.
    std::ifstream in(dir / "manifest.json");
    json manifest = json::parse(in);
    for (const auto& r : algos["por_ucrl"]["runs"]) {
        for (const auto& m : manifest["runs"]) {
            if (m["file"] == r["file"]) {
                CHECK(m["final_regret"].get<double>() == r["final_regret"].get<double>());
                CHECK(m["coverage"] == r["coverage"]);
            }
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("summarize rejects malformed input") {
    fs::path dir = fresh_dir("malformed");
    CHECK_THROWS_AS(summarize(dir), PorrlError);
    fs::create_directories(dir);
    CHECK_THROWS_AS(summarize(dir), PorrlError);
    write_file_atomic(dir / "a_seed0.csv", "episode,policy_id,value\n1,0,0\n");
    CHECK_THROWS_AS(summarize(dir), PorrlError);
    write_file_atomic(dir / "a_seed0.csv",
                      "episode,policy_id,value,regret_inc,cum_regret,optimistic_value,truth_in_cf,truth_in_cp\n"
                      "1,00,0.5,0.5,zero,1,1,1\n");
    CHECK_THROWS_AS(summarize(dir), PorrlError);
    write_file_atomic(dir / "a_seed0.csv",
                      "episode,policy_id,value,regret_inc,cum_regret,optimistic_value,truth_in_cf,truth_in_cp\n"
                      "1,00,0.5,0.5,0.5,1,1\n");
    CHECK_THROWS_AS(summarize(dir), PorrlError);
    fs::remove_all(dir);
}

TEST_CASE("dueling runs write the dueling schema") {
    fs::path dir = fresh_dir("dueling_csv");
    json doc = lock_config(dir, "naive_reduction_por_ucrl");
    doc["mode"] = "dueling";
    doc["env"]["params"] = {{"A", 2}, {"H", 2}, {"combo", {1, 1}}};
    doc["seeds"] = {9};
    doc["T"] = 20;
    json manifest = run_experiment(parse_config(doc));
    CHECK(manifest["runs"][0]["status"] == "ok");
    std::string text = slurp(dir / "naive_reduction_por_ucrl_seed9.csv");
    CHECK(text.rfind("round,pi1_id,pi2_id,duel_regret_inc,cum_duel_regret,candidate_count,opt_in_candidates\n", 0) == 0);
    json s = summarize(dir);
    CHECK(s["algorithms"]["naive_reduction_por_ucrl"]["schema"] == "dueling");
    CHECK(s["algorithms"]["naive_reduction_por_ucrl"]["coverage"].is_null());
    fs::remove_all(dir);
}
