#include "fedq/mdp_io.hpp"

#include <cmath>
#include <fstream>

#include "fedq/error.hpp"

namespace fedq {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* field) {
    auto it = doc.find(field);
    if (it == doc.end()) throw ValidationError(std::string("MDP file: missing field '") + field + "'");
    return *it;
}

std::size_t require_count(const json& doc, const char* field) {
    const json& v = require(doc, field);
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw ValidationError(std::string("MDP file: '") + field + "' must be a positive integer");
    }
    return v.get<std::size_t>();
}

std::string row_name(std::size_t s, std::size_t a) {
    return "row [" + std::to_string(s) + "][" + std::to_string(a) + "]";
}

}  // namespace

TabularMdp mdp_from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("MDP file: top level must be an object");
    const json& gamma_field = require(doc, "gamma");
    if (!gamma_field.is_number()) throw ValidationError("MDP file: 'gamma' must be a number");
    const double gamma = gamma_field.get<double>();
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("MDP file: 'gamma' must lie in (0, 1)");
    const std::size_t num_states = require_count(doc, "num_states");
    const std::size_t num_actions = require_count(doc, "num_actions");

    const json& rewards_field = require(doc, "rewards");
    const json& transitions_field = require(doc, "transitions");
    if (!rewards_field.is_array() || rewards_field.size() != num_states) {
        throw ValidationError("MDP file: 'rewards' must have num_states rows");
    }
    if (!transitions_field.is_array() || transitions_field.size() != num_states) {
        throw ValidationError("MDP file: 'transitions' must have num_states entries");
    }

    std::vector<double> rewards;
    std::vector<double> transitions;
    rewards.reserve(num_states * num_actions);
    transitions.reserve(num_states * num_actions * num_states);
    for (std::size_t s = 0; s < num_states; ++s) {
        const json& reward_row = rewards_field[s];
        const json& transition_block = transitions_field[s];
        if (!reward_row.is_array() || reward_row.size() != num_actions) {
            throw ValidationError("MDP file: rewards row [" + std::to_string(s) + "] must have num_actions entries");
        }
        if (!transition_block.is_array() || transition_block.size() != num_actions) {
            throw ValidationError("MDP file: transitions [" + std::to_string(s) + "] must have num_actions rows");
        }
        for (std::size_t a = 0; a < num_actions; ++a) {
            if (!reward_row[a].is_number()) throw ValidationError("MDP file: reward " + row_name(s, a) + " is not a number");
            const double r = reward_row[a].get<double>();
            if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("MDP file: reward " + row_name(s, a) + " outside [0, 1]");
            rewards.push_back(r);

            const json& row = transition_block[a];
            if (!row.is_array() || row.size() != num_states) {
                throw ValidationError("MDP file: transition " + row_name(s, a) + " must have num_states entries");
            }
            double total = 0.0;
            for (const json& entry : row) {
                if (!entry.is_number()) throw ValidationError("MDP file: transition " + row_name(s, a) + " has a non-number");
                const double prob = entry.get<double>();
                if (!(prob >= 0.0)) throw ValidationError("MDP file: transition " + row_name(s, a) + " has a negative entry");
                total += prob;
                transitions.push_back(prob);
            }
            if (std::abs(total - 1.0) > 1e-12) {
                throw ValidationError("MDP file: transition " + row_name(s, a) + " sums to " + std::to_string(total));
            }
        }
    }
    return TabularMdp(num_states, num_actions, gamma, std::move(rewards), std::move(transitions));
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open MDP file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("MDP file " + path.string() + ": " + e.what());
    }
    return mdp_from_json(doc);
}

json mdp_to_json(const TabularMdp& mdp) {
    json rewards = json::array();
    json transitions = json::array();
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        json reward_row = json::array();
        json block = json::array();
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            reward_row.push_back(mdp.reward(s, a));
            auto row = mdp.transition_row(s, a);
            block.push_back(std::vector<double>(row.begin(), row.end()));
        }
        rewards.push_back(std::move(reward_row));
        transitions.push_back(std::move(block));
    }
    return json{{"gamma", mdp.gamma()},
                {"num_states", mdp.num_states()},
                {"num_actions", mdp.num_actions()},
                {"rewards", std::move(rewards)},
                {"transitions", std::move(transitions)}};
}

json qtable_to_json(const QTable& q) {
    json rows = json::array();
    for (std::size_t s = 0; s < q.num_states(); ++s) {
        json row = json::array();
        for (std::size_t a = 0; a < q.num_actions(); ++a) row.push_back(q(s, a));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace fedq
