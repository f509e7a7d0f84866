#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fedq/mdp.hpp"

namespace fedq {

// MDP file format:
//   {"gamma": 0.9, "num_states": S, "num_actions": A,
//    "rewards": [[r(s, a) ...] ...], "transitions": [[[P(s'|s, a) ...] ...] ...]}
// Nesting is row-major [s][a][s'].

/// Parses and validates an MDP. Errors name the first offending row.
TabularMdp mdp_from_json(const nlohmann::json& doc);
TabularMdp load_mdp(const std::filesystem::path& path);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
nlohmann::json qtable_to_json(const QTable& q);

}  // namespace fedq
