#include "porrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "porrl/dims.hpp"
#include "porrl/serialize.hpp"

namespace porrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) out += "\n  - " + p;
    return out;
}

/// Collects every problem found while reading a JSON object instead of stopping at the first.
class FieldReader {
public:
    FieldReader(const json& obj, std::string path, std::vector<std::string>& problems)
        : obj_(obj), path_(std::move(path)), problems_(problems) {}

    bool ok_object() {
        if (!obj_.is_object()) {
            problems_.push_back(path_ + ": expected an object");
            return false;
        }
        return true;
    }

    void allow(std::initializer_list<const char*> keys) {
        if (!obj_.is_object()) return;
        for (const auto& [k, _] : obj_.items()) {
            bool known = false;
            for (const char* a : keys) known = known || k == a;
            if (!known) problems_.push_back(where(k) + ": unknown key");
        }
    }

    bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void problem(const std::string& key, const std::string& msg) { problems_.push_back(where(key) + ": " + msg); }

    std::optional<double> number(const char* key, bool required) {
        if (!has(key)) return missing<double>(key, required);
        const json& v = obj_.at(key);
        if (!v.is_number()) return bad<double>(key, "expected a number");
        double x = v.get<double>();
        if (!std::isfinite(x)) return bad<double>(key, "must be finite");
        return x;
    }

    std::optional<std::int64_t> integer(const char* key, bool required) {
        if (!has(key)) return missing<std::int64_t>(key, required);
        const json& v = obj_.at(key);
        if (!v.is_number_integer()) return bad<std::int64_t>(key, "expected an integer");
        return v.get<std::int64_t>();
    }

    std::optional<std::string> string(const char* key, bool required) {
        if (!has(key)) return missing<std::string>(key, required);
        const json& v = obj_.at(key);
        if (!v.is_string()) return bad<std::string>(key, "expected a string");
        return v.get<std::string>();
    }

    std::optional<json> object(const char* key, bool required) {
        if (!has(key)) return missing<json>(key, required);
        const json& v = obj_.at(key);
        if (!v.is_object()) return bad<json>(key, "expected an object");
        return v;
    }

    /// Arrays of numbers nested `depth` levels deep.
    std::optional<json> numeric_array(const char* key, int depth, bool required) {
        if (!has(key)) return missing<json>(key, required);
        const json& v = obj_.at(key);
        if (!nested_numbers(v, depth)) {
            return bad<json>(key, depth == 1 ? "expected an array of numbers"
                                             : "expected a " + std::to_string(depth) + "-level nested array of numbers");
        }
        return v;
    }

private:
    static bool nested_numbers(const json& v, int depth) {
        if (depth == 0) return v.is_number();
        if (!v.is_array()) return false;
        return std::all_of(v.begin(), v.end(), [&](const json& e) { return nested_numbers(e, depth - 1); });
    }

    template <class T>
    std::optional<T> missing(const char* key, bool required) {
        if (required) problems_.push_back(where(key) + ": required");
        return std::nullopt;
    }

    template <class T>
    std::optional<T> bad(const char* key, const std::string& msg) {
        problems_.push_back(where(key) + ": " + msg);
        return std::nullopt;
    }

    const json& obj_;
    std::string path_;
    std::vector<std::string>& problems_;
};

std::optional<int> positive_int(FieldReader& r, const char* key, bool required, std::int64_t max = 1'000'000'000) {
    auto v = r.integer(key, required);
    if (!v) return std::nullopt;
    if (*v < 1 || *v > max) {
        r.problem(key, "must lie in [1, " + std::to_string(max) + "]");
        return std::nullopt;
    }
    return static_cast<int>(*v);
}

std::optional<NoiseKind> parse_noise(FieldReader& r, const char* key) {
    auto v = r.string(key, false);
    if (!v) return std::nullopt;
    if (*v == "bernoulli") return NoiseKind::bernoulli;
    if (*v == "gaussian") return NoiseKind::gaussian;
    r.problem(key, "expected \"bernoulli\" or \"gaussian\"");
    return std::nullopt;
}

std::vector<double> flatten(const json& v) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
        return out;
    }
    for (const auto& e : v) {
        auto part = flatten(e);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<std::vector<double>> matrix(const json& v) {
    std::vector<std::vector<double>> out;
    for (const auto& row : v) out.push_back(row.get<std::vector<double>>());
    return out;
}

Environment build_environment(const std::string& name, const json& params, std::vector<std::string>& problems) {
    FieldReader r(params, "env.params", problems);
    if (!r.ok_object()) throw ConfigError(problems);
    const std::size_t before = problems.size();
    auto check = [&] {
        if (problems.size() != before) throw ConfigError(problems);
    };
    try {
        if (name == "combination_lock") {
            r.allow({"A", "H", "q", "combo", "variant", "include_null"});
            auto A = positive_int(r, "A", true, 64);
            auto H = positive_int(r, "H", true, 64);
            auto q = r.number("q", false);
            auto combo = r.numeric_array("combo", 1, false);
            auto variant = r.string("variant", false);
            bool include_null = true;
            if (r.has("include_null")) {
                if (!params.at("include_null").is_boolean()) r.problem("include_null", "expected a boolean");
                else include_null = params.at("include_null").get<bool>();
            }
            LockMode mode = LockMode::dense;
            if (variant) {
                if (*variant == "sparse") mode = LockMode::sparse;
                else if (*variant != "dense") r.problem("variant", "expected \"dense\" or \"sparse\"");
            }
            std::vector<int> c;
            if (combo) {
                for (const auto& e : *combo) {
                    if (!e.is_number_integer()) {
                        r.problem("combo", "entries must be integers");
                        break;
                    }
                    c.push_back(e.get<int>());
                }
            } else if (H) {
                c.assign(*H, 0);
            }
            check();
            return lock_environment(*A, *H, q.value_or(0.8), c, mode, include_null);
        }
        if (name == "markovian_trap") {
            r.allow({"H"});
            auto H = positive_int(r, "H", false, 64);
            check();
            return trap_environment(H.value_or(4));
        }
        if (name == "linear_reward") {
            r.allow({"S", "A", "H", "features", "weights", "transitions", "initial_state", "candidate_weights",
                     "noise", "noise_scale"});
            auto S = positive_int(r, "S", true, 4096);
            auto A = positive_int(r, "A", true, 4096);
            auto H = positive_int(r, "H", true, 64);
            auto features = r.numeric_array("features", 2, true);
            auto weights = r.numeric_array("weights", 1, true);
            auto transitions = r.numeric_array("transitions", 3, true);
            auto init = r.integer("initial_state", false);
            auto cands = r.numeric_array("candidate_weights", 2, false);
            auto noise = parse_noise(r, "noise");
            auto scale = r.number("noise_scale", false);
            check();
            return linear_environment(*S, *A, *H, matrix(*features), weights->get<std::vector<double>>(),
                                      flatten(*transitions), cands ? matrix(*cands) : std::vector<std::vector<double>>{},
                                      static_cast<int>(init.value_or(0)), noise.value_or(NoiseKind::bernoulli),
                                      scale.value_or(0.5));
        }
        if (name == "stochastic_internal") {
            r.allow({"seed"});
            auto seed = r.integer("seed", false);
            if (seed && *seed < 0) r.problem("seed", "must be nonnegative");
            check();
            auto fixture = make_stochastic_internal_env(static_cast<std::uint64_t>(seed.value_or(0)));
            return environment_from_spec(fixture.spec, "stochastic_internal");
        }
        if (name == "custom") {
            r.allow({"spec"});
            auto spec = r.object("spec", true);
            check();
            return environment_from_spec(spec_from_json(*spec), "custom");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const PorrlError& e) {
        problems.push_back("env.params: " + std::string(e.what()));
        throw ConfigError(problems);
    } catch (const json::exception& e) {
        problems.push_back("env.params: " + std::string(e.what()));
        throw ConfigError(problems);
    }
    problems.push_back("env.name: unknown environment \"" + name + "\"");
    throw ConfigError(problems);
}

bool known_name(const std::vector<std::string>& names, const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_id(std::uint64_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id));
    return buf;
}

std::string mode_name(RunMode m) {
    switch (m) {
        case RunMode::cardinal: return "cardinal";
        case RunMode::dueling: return "dueling";
        case RunMode::dims: return "dims";
    }
    return "?";
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json stats_json(const std::vector<double>& xs) {
    if (xs.empty()) return nullptr;
    MeanStderr ms = mean_stderr(xs);
    return json{{"mean", ms.mean}, {"stderr", ms.stderr_}, {"n", ms.n}};
}

/// Per-run summary quantities shared by the manifest and summarize().
struct RunStats {
    double final_regret = 0.0;
    std::optional<double> slope;
    std::optional<double> coverage;
};

/// Fraction of rounds where every applicable flag is 1; null when no flag applies anywhere.
std::optional<double> coverage_fraction(const std::vector<std::vector<int>>& flags) {
    std::size_t applicable = 0, covered = 0;
    for (const auto& row : flags) {
        bool any = false, all = true;
        for (int f : row) {
            if (f == kFlagNotApplicable) continue;
            any = true;
            all = all && f == 1;
        }
        if (!any) continue;
        ++applicable;
        covered += all ? 1 : 0;
    }
    if (applicable == 0) return std::nullopt;
    return static_cast<double>(covered) / static_cast<double>(applicable);
}

RunStats cardinal_stats(const RegretLog& log) {
    RunStats s;
    std::vector<double> t, cum;
    std::vector<std::vector<int>> flags;
    for (const auto& e : log.entries) {
        t.push_back(e.episode);
        cum.push_back(e.cum_regret);
        flags.push_back({e.truth_in_cf, e.truth_in_cp});
    }
    if (!cum.empty()) s.final_regret = cum.back();
    s.slope = loglog_slope(t, cum);
    s.coverage = coverage_fraction(flags);
    return s;
}

RunStats dueling_stats(const DuelLog& log) {
    RunStats s;
    std::vector<double> t, cum;
    std::vector<std::vector<int>> flags;
    for (const auto& e : log.entries) {
        t.push_back(e.round);
        cum.push_back(e.cum_regret);
        flags.push_back({e.opt_in_candidates});
    }
    if (!cum.empty()) s.final_regret = cum.back();
    s.slope = loglog_slope(t, cum);
    s.coverage = coverage_fraction(flags);
    return s;
}

json aggregate_runs(const json& runs) {
    std::vector<double> finals, slopes, coverages;
    std::size_t failed = 0;
    for (const auto& r : runs) {
        if (r.at("status") != "ok") {
            ++failed;
            continue;
        }
        finals.push_back(r.at("final_regret").get<double>());
        if (!r.at("slope").is_null()) slopes.push_back(r.at("slope").get<double>());
        if (!r.at("coverage").is_null()) coverages.push_back(r.at("coverage").get<double>());
    }
    return json{{"runs", runs.size()},
                {"failed", failed},
                {"final_regret", stats_json(finals)},
                {"slope", stats_json(slopes)},
                {"coverage", stats_json(coverages)}};
}

json dim_json(const DimResult& d) {
    return json{{"dimension", d.dimension},
                {"witness", d.witness},
                {"scale", d.scale},
                {"budget_exceeded", d.budget_exceeded},
                {"expansions", d.expansions}};
}

json horizon_json(const HorizonDims& hd, int H) {
    json per_h = json::array(), witnesses = json::array();
    for (int h = 1; h <= H; ++h) {
        per_h.push_back(hd.per_h[h].dimension);
        witnesses.push_back(hd.per_h[h].witness);
    }
    return json{{"per_h_dims", per_h}, {"max", hd.max}, {"witnesses", witnesses}, {"budget_flag", hd.budget_exceeded}};
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, const std::string& where) {
    try {
        std::size_t used = 0;
        double x = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return x;
    } catch (const std::exception&) {
        throw PorrlError("malformed CSV " + where + ": not a number \"" + cell + "\"");
    }
}

const std::vector<std::string> kCardinalColumns = {"episode",          "policy_id",  "value",      "regret_inc",
                                                   "cum_regret",       "optimistic_value", "truth_in_cf",
                                                   "truth_in_cp"};
const std::vector<std::string> kDuelingColumns = {"round",          "pi1_id",          "pi2_id",           "duel_regret_inc",
                                                  "cum_duel_regret", "candidate_count", "opt_in_candidates"};

std::string join_columns(const std::vector<std::string>& cols) {
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    return out;
}

/// One parsed run CSV.
struct ParsedRun {
    std::string algorithm;
    std::optional<std::uint64_t> seed;
    bool dueling = false;
    std::vector<double> t, inc, cum;
    std::vector<std::vector<int>> flags;
};

ParsedRun parse_run_csv(const fs::path& path) {
    ParsedRun run;
    const std::string stem = path.stem().string();
    const auto pos = stem.rfind("_seed");
    run.algorithm = pos == std::string::npos ? stem : stem.substr(0, pos);
    if (pos != std::string::npos) {
        const std::string digits = stem.substr(pos + 5);
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
            run.seed = std::stoull(digits);
        }
    }

    std::ifstream in(path);
    if (!in) throw PorrlError("cannot read " + path.string());
    std::string line;
    const std::string name = path.filename().string();
    if (!std::getline(in, line)) throw PorrlError("malformed CSV " + name + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == join_columns(kCardinalColumns)) run.dueling = false;
    else if (line == join_columns(kDuelingColumns)) run.dueling = true;
    else throw PorrlError("malformed CSV " + name + ": unrecognized header \"" + line + "\"");
    const std::size_t width = run.dueling ? kDuelingColumns.size() : kCardinalColumns.size();

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = name + " line " + std::to_string(lineno);
        auto cells = split_csv_line(line);
        if (cells.size() != width) {
            throw PorrlError("malformed CSV " + where + ": expected " + std::to_string(width) + " columns, got " +
                             std::to_string(cells.size()));
        }
        if (run.dueling) {
            run.t.push_back(parse_cell(cells[0], where));
            run.inc.push_back(parse_cell(cells[3], where));
            run.cum.push_back(parse_cell(cells[4], where));
            run.flags.push_back({static_cast<int>(parse_cell(cells[6], where))});
        } else {
            run.t.push_back(parse_cell(cells[0], where));
            run.inc.push_back(parse_cell(cells[3], where));
            run.cum.push_back(parse_cell(cells[4], where));
            run.flags.push_back(
                {static_cast<int>(parse_cell(cells[6], where)), static_cast<int>(parse_cell(cells[7], where))});
        }
    }
    return run;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : PorrlError(join_problems(problems)), problems_(std::move(problems)) {}

const std::vector<std::pair<std::string, std::string>>& environment_catalog() {
    static const std::vector<std::pair<std::string, std::string>> catalog = {
        {"combination_lock", "A, H, q=0.8, combo=[0..], variant=dense|sparse, include_null=true"},
        {"markovian_trap", "H=4"},
        {"linear_reward",
         "S, A, H, features[(SA)^H][d], weights[d], transitions[S][A][S], initial_state=0, candidate_weights=[], "
         "noise=bernoulli|gaussian, noise_scale=0.5"},
        {"stochastic_internal", "seed=0"},
        {"custom", "spec (PORMDP document)"},
    };
    return catalog;
}

Environment make_environment(const std::string& name, const json& params) {
    std::vector<std::string> problems;
    return build_environment(name, params, problems);
}

ExperimentConfig parse_config(const json& doc) {
    std::vector<std::string> problems;
    ExperimentConfig cfg;
    cfg.source = doc;
    FieldReader top(doc, "", problems);
    if (!top.ok_object()) throw ConfigError(problems);
    top.allow({"mode", "env", "algorithm", "T", "seeds", "output_dir", "dims", "workers"});

    if (auto mode = top.string("mode", true)) {
        if (*mode == "cardinal") cfg.mode = RunMode::cardinal;
        else if (*mode == "dueling") cfg.mode = RunMode::dueling;
        else if (*mode == "dims") cfg.mode = RunMode::dims;
        else top.problem("mode", "expected \"cardinal\", \"dueling\" or \"dims\"");
    }
    const bool learning = cfg.mode != RunMode::dims;

    if (auto env = top.object("env", true)) {
        FieldReader r(*env, "env", problems);
        r.allow({"name", "params"});
        if (auto name = r.string("name", true)) {
            const auto& cat = environment_catalog();
            if (std::none_of(cat.begin(), cat.end(), [&](const auto& e) { return e.first == *name; })) {
                r.problem("name", "unknown environment \"" + *name + "\"");
            } else {
                cfg.env_name = *name;
            }
        }
        if (auto params = r.object("params", false)) cfg.env_params = *params;
    }

    if (auto algo = top.object("algorithm", learning)) {
        FieldReader r(*algo, "algorithm", problems);
        r.allow({"name", "params"});
        if (auto name = r.string("name", learning)) {
            const auto& names =
                cfg.mode == RunMode::dueling ? dueling_algorithm_names() : cardinal_algorithm_names();
            if (cfg.mode != RunMode::dims && !known_name(names, *name)) {
                r.problem("name", "unknown " + mode_name(cfg.mode) + " algorithm \"" + *name + "\"");
            }
            cfg.algorithm = *name;
        }
        if (auto params = r.object("params", false)) {
            FieldReader p(*params, "algorithm.params", problems);
            if (cfg.mode == RunMode::dueling) {
                p.allow({"delta", "bonus_scale", "zeta_prefix", "duel_activation", "duel_noise", "duel_noise_scale",
                         "transition_candidates", "max_policies", "max_models"});
            } else {
                p.allow({"delta", "bonus_scale", "zeta_prefix", "golf_c"});
            }
            auto delta = p.number("delta", false);
            auto scale = p.number("bonus_scale", false);
            auto zeta = p.number("zeta_prefix", false);
            if (delta && !(*delta > 0.0 && *delta < 1.0)) p.problem("delta", "must lie in (0, 1)");
            if (scale && !(*scale > 0.0)) p.problem("bonus_scale", "must be positive");
            if (zeta && !(*zeta > 0.0)) p.problem("zeta_prefix", "must be positive");
            if (cfg.mode == RunMode::dueling) {
                if (delta) cfg.dueling.delta = *delta;
                if (scale) cfg.dueling.bonus_scale = *scale;
                if (zeta) cfg.dueling.zeta_prefix = *zeta;
                if (auto act = p.string("duel_activation", false)) {
                    if (*act == "identity") cfg.dueling.activation = Activation::identity;
                    else if (*act == "logistic") cfg.dueling.activation = Activation::logistic;
                    else p.problem("duel_activation", "expected \"identity\" or \"logistic\"");
                }
                if (auto noise = parse_noise(p, "duel_noise")) cfg.dueling.noise = *noise;
                if (auto ns = p.number("duel_noise_scale", false)) {
                    if (*ns > 0.0) cfg.dueling.noise_scale = *ns;
                    else p.problem("duel_noise_scale", "must be positive");
                }
                if (auto tc = p.numeric_array("transition_candidates", 4, false)) {
                    for (const auto& kernel : *tc) cfg.dueling.transition_candidates.push_back(flatten(kernel));
                }
                if (auto mp = p.integer("max_policies", false)) {
                    if (*mp >= 1) cfg.dueling.max_policies = static_cast<std::uint64_t>(*mp);
                    else p.problem("max_policies", "must be positive");
                }
                if (auto mm = p.integer("max_models", false)) {
                    if (*mm >= 1) cfg.dueling.max_models = static_cast<std::uint64_t>(*mm);
                    else p.problem("max_models", "must be positive");
                }
            } else {
                if (delta) cfg.cardinal.delta = *delta;
                if (scale) cfg.cardinal.bonus_scale = *scale;
                if (zeta) cfg.cardinal.zeta_prefix = *zeta;
                if (auto c = p.number("golf_c", false)) {
                    if (*c > 0.0) cfg.cardinal.golf_c = *c;
                    else p.problem("golf_c", "must be positive");
                }
            }
        }
    }

    if (auto T = positive_int(top, "T", learning)) cfg.T = *T;

    if (top.has("seeds")) {
        const json& seeds = doc.at("seeds");
        if (!seeds.is_array()) {
            top.problem("seeds", "expected an array of nonnegative integers");
        } else {
            for (const auto& s : seeds) {
                if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
                    top.problem("seeds", "entries must be nonnegative integers");
                    cfg.seeds.clear();
                    break;
                }
                cfg.seeds.push_back(s.get<std::uint64_t>());
            }
            if (seeds.empty() && learning) top.problem("seeds", "must be nonempty");
        }
    } else if (learning) {
        top.problem("seeds", "required");
    }

    if (auto out = top.string("output_dir", true)) {
        if (out->empty()) top.problem("output_dir", "must be nonempty");
        cfg.output_dir = *out;
    }

    if (auto dims = top.object("dims", false)) {
        FieldReader r(*dims, "dims", problems);
        r.allow({"alpha", "epsilon", "budget"});
        if (auto a = r.number("alpha", false)) {
            if (*a > 0.0) cfg.dims.alpha = *a;
            else r.problem("alpha", "must be positive");
        }
        if (auto e = r.number("epsilon", false)) {
            if (*e > 0.0) cfg.dims.epsilon = *e;
            else r.problem("epsilon", "must be positive");
        }
        if (auto b = r.integer("budget", false)) {
            if (*b >= 1) cfg.dims.budget = static_cast<std::uint64_t>(*b);
            else r.problem("budget", "must be positive");
        }
    }
    if (cfg.mode == RunMode::dims && !cfg.dims.epsilon && cfg.T < 1) {
        problems.push_back("T: required in dims mode unless dims.epsilon is given");
    }

    if (auto w = top.integer("workers", false)) {
        if (*w >= 0 && *w <= 4096) cfg.workers = static_cast<int>(*w);
        else top.problem("workers", "must lie in [0, 4096]");
    }

    if (!problems.empty()) throw ConfigError(problems);

    // Environment-dependent checks run once the structure is sound.
    Environment env = build_environment(cfg.env_name, cfg.env_params, problems);
    try {
        if (cfg.mode == RunMode::dueling) cfg.dueling.validate(env.spec);
        if (cfg.mode == RunMode::cardinal) cfg.cardinal.validate();
    } catch (const PorrlError& e) {
        throw ConfigError({"algorithm.params: " + std::string(e.what())});
    }
    if (cfg.mode == RunMode::dueling && !cfg.dueling.transition_candidates.empty() && cfg.algorithm != "dueling_confidence") {
        throw ConfigError({"algorithm.params.transition_candidates: only supported by dueling_confidence"});
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config file " + path.string()});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({"config file " + path.string() + " is not valid JSON: " + e.what()});
    }
    return parse_config(doc);
}

std::optional<double> loglog_slope(const std::vector<double>& t, const std::vector<double>& cum) {
    if (t.size() != cum.size()) throw PorrlError("slope fit needs matching t and cumulative columns");
    if (t.empty()) return std::nullopt;
    const double T = *std::max_element(t.begin(), t.end());
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= T / 2.0 && t[i] > 0.0 && cum[i] > 0.0) {
            xs.push_back(std::log(t[i]));
            ys.push_back(std::log(cum[i]));
        }
    }
    if (xs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0.0) return std::nullopt;
    return sxy / sxx;
}

MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr out;
    out.n = xs.size();
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        const double var = ss / static_cast<double>(xs.size() - 1);
        out.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return out;
}

std::string cardinal_csv(const RegretLog& log) {
    std::string out = join_columns(kCardinalColumns) + "\n";
    for (const auto& e : log.entries) {
        out += std::to_string(e.episode) + "," + format_id(e.policy_id) + "," + format_double(e.value) + "," +
               format_double(e.regret_inc) + "," + format_double(e.cum_regret) + "," +
               format_double(e.optimistic_value) + "," + std::to_string(e.truth_in_cf) + "," +
               std::to_string(e.truth_in_cp) + "\n";
    }
    return out;
}

std::string dueling_csv(const DuelLog& log) {
    std::string out = join_columns(kDuelingColumns) + "\n";
    for (const auto& e : log.entries) {
        out += std::to_string(e.round) + "," + format_id(e.pi1_id) + "," + format_id(e.pi2_id) + "," +
               format_double(e.regret_inc) + "," + format_double(e.cum_regret) + "," +
               std::to_string(e.candidate_count) + "," + std::to_string(e.opt_in_candidates) + "\n";
    }
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    fs::path tmp = path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PorrlError("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw PorrlError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw PorrlError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

json dims_report(const Environment& env, const DimsOptions& options, int T) {
    const double eps = options.epsilon ? *options.epsilon : default_dims_epsilon(options.alpha, T);
    const int H = env.spec.horizon;
    const QClass qc = build_qclass(env);
    const HorizonDims habe = habe_dim(env, qc, options.alpha, eps, options.budget);
    const HorizonDims be = be_dim(env, qc, eps, options.budget);

    json report = horizon_json(habe, H);
    report["alpha"] = options.alpha;
    report["epsilon"] = eps;
    report["qclass_size"] = qc.size();
    report["be"] = horizon_json(be, H);

    json eluder = json::array();
    for (int h : env.spec.feedback_steps) {
        json entry{{"h", h}};
        try {
            DimResult d = eluder_dim(env.classes[h], eps, options.budget);
            entry.update(dim_json(d));
        } catch (const SizeError& e) {
            entry["error"] = e.what();
        }
        eluder.push_back(entry);
    }
    report["eluder"] = eluder;
    return report;
}

json run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const Environment env = make_environment(config.env_name, config.env_params);
    fs::create_directories(config.output_dir);

    json manifest;
    manifest["config"] = config.source;
    manifest["mode"] = mode_name(config.mode);
    manifest["env"] = config.env_name;
    manifest["algorithm"] = config.algorithm;
    manifest["optimal_value"] = optimal_policy(env.spec, env.truth).value;

    if (config.mode == RunMode::dims) {
        json report = dims_report(env, config.dims, config.T);
        write_file_atomic(config.output_dir / "dims_report.json", report.dump(2) + "\n");
        manifest["dims_report"] = "dims_report.json";
        manifest["runs"] = json::array();
    } else {
        const std::size_t n = config.seeds.size();
        std::vector<json> runs(n);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < n; i = next++) {
                const std::uint64_t seed = config.seeds[i];
                const std::string file = config.algorithm + "_seed" + std::to_string(seed) + ".csv";
                json rec{{"seed", seed}, {"file", file}};
                try {
                    RunStats stats;
                    if (config.mode == RunMode::cardinal) {
                        RegretLog log = run_cardinal(parse_cardinal_algorithm(config.algorithm), env, config.cardinal,
                                                     config.T, seed);
                        write_file_atomic(config.output_dir / file, cardinal_csv(log));
                        stats = cardinal_stats(log);
                    } else {
                        DuelLog log = run_dueling(parse_dueling_algorithm(config.algorithm), env, config.dueling,
                                                  config.T, seed);
                        write_file_atomic(config.output_dir / file, dueling_csv(log));
                        stats = dueling_stats(log);
                        rec["min_value"] = log.min_value;
                    }
                    rec["status"] = "ok";
                    rec["final_regret"] = stats.final_regret;
                    rec["slope"] = optional_number(stats.slope);
                    rec["coverage"] = optional_number(stats.coverage);
                    spdlog::debug("{} seed {}: final regret {:.4f}", config.algorithm, seed, stats.final_regret);
                } catch (const std::exception& e) {
                    rec["status"] = "failed";
                    rec["error"] = e.what();
                    spdlog::error("{} seed {} failed: {}", config.algorithm, seed, e.what());
                }
                runs[i] = std::move(rec);
            }
        };
        std::size_t workers = config.workers > 0 ? static_cast<std::size_t>(config.workers)
                                                 : std::max(1u, std::thread::hardware_concurrency());
        workers = std::min(workers, n);
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        manifest["runs"] = runs;
        manifest["summary"] = aggregate_runs(manifest["runs"]);
    }

    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file_atomic(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

json summarize(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw PorrlError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw PorrlError("no run CSVs in " + dir.string());

    struct Group {
        bool dueling = false;
        json runs = json::array();
        std::vector<double> finals, slopes, coverages, gaps;
    };
    std::map<std::string, Group> groups;
    for (const auto& path : files) {
        ParsedRun run = parse_run_csv(path);
        auto [it, inserted] = groups.try_emplace(run.algorithm);
        Group& g = it->second;
        if (inserted) g.dueling = run.dueling;
        else if (g.dueling != run.dueling) {
            throw PorrlError("malformed CSV " + path.filename().string() + ": schema differs from other " +
                             run.algorithm + " runs");
        }
        json rec{{"file", path.filename().string()}, {"rounds", run.t.size()}};
        rec["seed"] = run.seed ? json(*run.seed) : json(nullptr);
        const double final_regret = run.cum.empty() ? 0.0 : run.cum.back();
        const auto slope = loglog_slope(run.t, run.cum);
        const auto coverage = coverage_fraction(run.flags);
        rec["final_regret"] = final_regret;
        rec["slope"] = optional_number(slope);
        rec["coverage"] = optional_number(coverage);
        g.finals.push_back(final_regret);
        if (slope) g.slopes.push_back(*slope);
        if (coverage) g.coverages.push_back(*coverage);
        if (!run.dueling && !run.inc.empty()) {
            // The played policy's exact gap is its recorded regret increment.
            const std::size_t idx = pac_sample_index(run.inc.size(), run.seed.value_or(0));
            rec["pac_episode"] = idx + 1;
            rec["pac_gap"] = run.inc[idx];
            g.gaps.push_back(run.inc[idx]);
        }
        g.runs.push_back(rec);
    }

    json out;
    out["directory"] = dir.string();
    json algos = json::object();
    for (auto& [name, g] : groups) {
        algos[name] = json{{"schema", g.dueling ? "dueling" : "cardinal"},
                           {"runs", g.runs},
                           {"final_regret", stats_json(g.finals)},
                           {"slope", stats_json(g.slopes)},
                           {"coverage", stats_json(g.coverages)},
                           {"pac_gap", stats_json(g.gaps)}};
    }
    out["algorithms"] = algos;
    return out;
}

}  // namespace porrl
