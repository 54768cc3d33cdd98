#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "porrl/cardinal.hpp"
#include "porrl/dueling.hpp"
#include "porrl/envs.hpp"
#include "porrl/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

porrl::ExperimentConfig load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed,
                                            const std::string& out) {
    porrl::ExperimentConfig cfg = porrl::load_config(path);
    if (seed) cfg.seeds = {*seed};
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experiments with partially observed reward-state MDPs"};
    app.require_subcommand(1);

    std::string config_path, summary_dir, out;
    std::optional<std::uint64_t> seed_override;
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log per-seed progress");

    auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
    run->add_option("config", config_path, "Config JSON")->required();
    run->add_option("--seed-override", seed_override, "Run only this seed");
    run->add_option("--out", out, "Output directory (overrides output_dir)");

    auto* dims = app.add_subcommand("dims", "Print the dimension report for a config's environment");
    dims->add_option("config", config_path, "Config JSON")->required();
    dims->add_option("--out", out, "Also write the report to this file");

    auto* summarize = app.add_subcommand("summarize", "Aggregate run CSVs per algorithm");
    summarize->add_option("dir", summary_dir, "Directory of run CSVs")->required();
    summarize->add_option("--out", out, "Summary path (default <dir>/summary.json)");

    auto* list_envs = app.add_subcommand("list-envs", "List environment constructors");
    auto* list_algos = app.add_subcommand("list-algos", "List learning algorithms");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*list_envs) {
            for (const auto& [name, params] : porrl::environment_catalog()) std::cout << name << "  " << params << "\n";
            return kExitOk;
        }
        if (*list_algos) {
            for (const auto& n : porrl::cardinal_algorithm_names()) std::cout << "cardinal  " << n << "\n";
            for (const auto& n : porrl::dueling_algorithm_names()) std::cout << "dueling   " << n << "\n";
            return kExitOk;
        }
        if (*run) {
            auto cfg = load_with_overrides(config_path, seed_override, out);
            nlohmann::json manifest = porrl::run_experiment(cfg);
            std::size_t failed = 0;
            for (const auto& r : manifest["runs"]) failed += r.at("status") == "ok" ? 0 : 1;
            std::cout << (cfg.output_dir / "manifest.json").string() << "\n";
            if (manifest.contains("summary")) std::cout << manifest["summary"].dump(2) << "\n";
            return failed == 0 ? kExitOk : kExitRuntime;
        }
        if (*dims) {
            auto cfg = porrl::load_config(config_path);
            porrl::Environment env = porrl::make_environment(cfg.env_name, cfg.env_params);
            nlohmann::json report = porrl::dims_report(env, cfg.dims, cfg.T);
            if (!out.empty()) porrl::write_file_atomic(out, report.dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
            return kExitOk;
        }
        if (*summarize) {
            nlohmann::json summary = porrl::summarize(summary_dir);
            const std::filesystem::path dest =
                out.empty() ? std::filesystem::path(summary_dir) / "summary.json" : std::filesystem::path(out);
            porrl::write_file_atomic(dest, summary.dump(2) + "\n");
            std::cout << summary.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const porrl::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
