#pragma once

// JSON encodings of the bell-core types.
//
//   {"scenario": {"inputs_a":2,"inputs_b":2,"outputs_a":2,"outputs_b":2}, "p": [...]}
//   {"scenario": {...}, "counts": [...]}
//   {"name": "...", "scenario": {...}, "beta": [...], "setting_weights": [...],
//    "local_bound": 2.0, "threshold": 1.9}
//
// Vectors are flat in (x, y, a, b) order.  Optional fields may be absent.

#include "direg/bell.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace direg {

nlohmann::json to_json(const Scenario& s);
nlohmann::json to_json(const Behavior& p);
nlohmann::json to_json(const FrequencyTable& f);
nlohmann::json to_json(const BellFunctional& f, std::optional<double> threshold = std::nullopt);
nlohmann::json to_json(const Eigen::VectorXd& v);

Scenario scenario_from_json(const nlohmann::json& j);
Behavior behavior_from_json(const nlohmann::json& j);
FrequencyTable frequencies_from_json(const nlohmann::json& j);
BellFunctional functional_from_json(const nlohmann::json& j);
std::optional<double> threshold_from_json(const nlohmann::json& j);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// A canonical distribution name (chsh, tau125, ...) or a path to a file
/// holding either a behavior ("p") or counts ("counts", converted to
/// relative frequencies).
Behavior load_behavior(const std::string& name_or_path);

/// Counts file, or a behavior source turned into counts with `n_per_setting`
/// trials per setting (deterministic rounding, see FrequencyTable::from_behavior).
FrequencyTable load_frequencies(const std::string& name_or_path, std::int64_t n_per_setting = 0);

/// A functional name (chsh, tau125, mdl) or a path to a functional file.
BellFunctional load_functional(const std::string& name_or_path);

}  // namespace direg
