#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "porrl/cardinal.hpp"
#include "porrl/core.hpp"
#include "porrl/dueling.hpp"
#include "porrl/envs.hpp"

namespace porrl {

/// Invalid configuration; carries one message per offending field.
class ConfigError : public PorrlError {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

enum class RunMode { cardinal, dueling, dims };

struct DimsOptions {
    double alpha = 0.5;
    std::optional<double> epsilon;   ///< defaults to min(α, √(1/T))
    std::uint64_t budget = 10'000'000;
};

struct ExperimentConfig {
    RunMode mode = RunMode::cardinal;
    std::string env_name;
    nlohmann::json env_params = nlohmann::json::object();
    std::string algorithm;
    CardinalParams cardinal;
    DuelingParams dueling;
    int T = 0;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    DimsOptions dims;
    int workers = 0;                 ///< 0 = hardware concurrency
    nlohmann::json source;           ///< the document as given, echoed into the manifest
};

/// Parses and validates a configuration document; throws ConfigError listing every problem.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Environment constructor names accepted in the env block, with their parameters.
const std::vector<std::pair<std::string, std::string>>& environment_catalog();

/// Builds the environment named in an env block; throws ConfigError on bad parameters.
Environment make_environment(const std::string& name, const nlohmann::json& params);

/// Least-squares slope of log(cum) on log(t) over t ∈ [T/2, T] using points with cum > 0.
std::optional<double> loglog_slope(const std::vector<double>& t, const std::vector<double>& cum);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};
/// Mean and standard error of the mean (0 for a single value).
MeanStderr mean_stderr(const std::vector<double>& xs);

/// CSV text for a regret log: episode,policy_id,value,regret_inc,cum_regret,optimistic_value,truth_in_cf,truth_in_cp.
std::string cardinal_csv(const RegretLog& log);
/// CSV text for a duel log: round,pi1_id,pi2_id,duel_regret_inc,cum_duel_regret,candidate_count,opt_in_candidates.
std::string dueling_csv(const DuelLog& log);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Dimension report for an environment: per-step HABE, BE and eluder dimensions with witnesses.
nlohmann::json dims_report(const Environment& env, const DimsOptions& options, int T);

/// Runs every seed on a worker pool, writes one CSV per run and manifest.json; returns the manifest.
nlohmann::json run_experiment(const ExperimentConfig& config);

/// Aggregates every run CSV in `dir` per algorithm; throws PorrlError on malformed files.
nlohmann::json summarize(const std::filesystem::path& dir);

}  // namespace porrl
