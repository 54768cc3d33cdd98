#include "porrl/serialize.hpp"

#include <string>

namespace porrl {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw SpecError(where + ": expected a JSON object");
    std::string bad;
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known) bad += (bad.empty() ? "" : ", ") + item.key();
    }
    if (!bad.empty()) throw SpecError(where + ": unknown keys: " + bad);
}

json spec_to_json(const PormdpSpec& spec) {
    const int S = spec.num_states, A = spec.num_actions, U = spec.num_internal;
    json transitions = json::array();
    for (int s = 0; s < S; ++s) {
        json by_action = json::array();
        for (int a = 0; a < A; ++a) {
            json row = json::array();
            for (int s2 = 0; s2 < S; ++s2) row.push_back(spec.P(s, a, s2));
            by_action.push_back(row);
        }
        transitions.push_back(by_action);
    }
    json reward = json::array();
    for (int k = 0; k < spec.num_feedback(); ++k) {
        json table = json::array();
        for (int s = 0; s < S; ++s) {
            json by_u = json::array();
            for (int u = 0; u < U; ++u) {
                json row = json::array();
                for (int a = 0; a < A; ++a) row.push_back(spec.r(k, s, u, a));
                by_u.push_back(row);
            }
            table.push_back(by_u);
        }
        reward.push_back(table);
    }
    json doc = {
        {"num_states", S},
        {"num_actions", A},
        {"horizon", spec.horizon},
        {"feedback_steps", spec.feedback_steps},
        {"transitions", transitions},
        {"initial_state", spec.initial_state},
        {"num_internal", U},
        {"decoder", spec.decoder},
        {"reward", reward},
        {"reward_bound", spec.reward_bound},
        {"activation", to_string(spec.activation)},
        {"noise", to_string(spec.noise)},
    };
    if (spec.noise == NoiseKind::gaussian) doc["noise_scale"] = spec.noise_scale;
    return doc;
}

PormdpSpec spec_from_json(const json& doc) {
    reject_unknown_keys(doc,
                        {"num_states", "num_actions", "horizon", "feedback_steps", "transitions", "initial_state",
                         "num_internal", "decoder", "reward", "reward_bound", "activation", "noise", "noise_scale"},
                        "spec");
    PormdpSpec spec;
    try {
        spec.num_states = doc.at("num_states").get<int>();
        spec.num_actions = doc.at("num_actions").get<int>();
        spec.horizon = doc.at("horizon").get<int>();
        spec.feedback_steps = doc.at("feedback_steps").get<std::vector<int>>();
        spec.initial_state = doc.value("initial_state", 0);
        spec.num_internal = doc.at("num_internal").get<int>();
        spec.decoder = doc.at("decoder").get<std::vector<std::vector<int>>>();
        spec.reward_bound = doc.value("reward_bound", 1.0);
        const auto act = doc.value("activation", std::string("identity"));
        if (act == "identity") spec.activation = Activation::identity;
        else if (act == "logistic") spec.activation = Activation::logistic;
        else throw SpecError("spec: unknown activation '" + act + "'");
        const auto noise = doc.value("noise", std::string("bernoulli"));
        if (noise == "bernoulli") spec.noise = NoiseKind::bernoulli;
        else if (noise == "gaussian") spec.noise = NoiseKind::gaussian;
        else throw SpecError("spec: unknown noise '" + noise + "'");
        if (doc.contains("noise_scale")) spec.noise_scale = doc.at("noise_scale").get<std::vector<double>>();

        const auto P = doc.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
        if (P.size() != static_cast<std::size_t>(spec.num_states))
            throw SpecError("spec: transitions must have S rows");
        for (const auto& by_action : P) {
            if (by_action.size() != static_cast<std::size_t>(spec.num_actions))
                throw SpecError("spec: transitions must have A entries per state");
            for (const auto& row : by_action) {
                if (row.size() != static_cast<std::size_t>(spec.num_states))
                    throw SpecError("spec: transition rows must have S entries");
                spec.transitions.insert(spec.transitions.end(), row.begin(), row.end());
            }
        }
        const auto R = doc.at("reward").get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
        for (const auto& table : R) {
            std::vector<double> flat;
            if (table.size() != static_cast<std::size_t>(spec.num_states))
                throw SpecError("spec: reward tables must have S rows");
            for (const auto& by_u : table) {
                if (by_u.size() != static_cast<std::size_t>(spec.num_internal))
                    throw SpecError("spec: reward tables must have U entries per state");
                for (const auto& row : by_u) {
                    if (row.size() != static_cast<std::size_t>(spec.num_actions))
                        throw SpecError("spec: reward rows must have A entries");
                    flat.insert(flat.end(), row.begin(), row.end());
                }
            }
            spec.reward.push_back(std::move(flat));
        }
    } catch (const json::exception& e) {
        throw SpecError(std::string("spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace porrl
