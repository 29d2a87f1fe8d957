#include "direg/json_io.hpp"

#include "direg/canonical.hpp"
#include "direg/error.hpp"

#include <algorithm>
#include <fstream>

namespace direg {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("missing JSON field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

json to_json(const Scenario& s) {
  return {{"inputs_a", s.inputs_a}, {"inputs_b", s.inputs_b}, {"outputs_a", s.outputs_a}, {"outputs_b", s.outputs_b}};
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json to_json(const Behavior& p) { return {{"scenario", to_json(p.scenario())}, {"p", to_json(p.values())}}; }

json to_json(const FrequencyTable& f) { return {{"scenario", to_json(f.scenario())}, {"counts", f.counts()}}; }

json to_json(const BellFunctional& f, std::optional<double> threshold) {
  json j = {{"name", f.name}, {"scenario", to_json(f.scenario)}, {"beta", to_json(f.beta)}};
  if (f.setting_weights) j["setting_weights"] = to_json(*f.setting_weights);
  if (f.local_bound) j["local_bound"] = *f.local_bound;
  if (threshold) j["threshold"] = *threshold;
  return j;
}

Scenario scenario_from_json(const json& j) {
  try {
    return Scenario(require(j, "inputs_a").get<int>(), require(j, "inputs_b").get<int>(),
                    require(j, "outputs_a").get<int>(), require(j, "outputs_b").get<int>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Behavior behavior_from_json(const json& j) {
  return Behavior(scenario_from_json(require(j, "scenario")), vector_from_json(require(j, "p")));
}

FrequencyTable frequencies_from_json(const json& j) {
  const Scenario s = scenario_from_json(require(j, "scenario"));
  const json& arr = require(j, "counts");
  if (!arr.is_array()) throw ValidationError("counts must be an array of integers");
  std::vector<std::int64_t> counts;
  counts.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer()) throw ValidationError("counts must be an array of integers");
    counts.push_back(v.get<std::int64_t>());
  }
  return FrequencyTable(s, std::move(counts));
}

BellFunctional functional_from_json(const json& j) {
  BellFunctional f;
  f.name = j.value("name", std::string("custom"));
  f.scenario = scenario_from_json(require(j, "scenario"));
  f.beta = vector_from_json(require(j, "beta"));
  if (static_cast<std::size_t>(f.beta.size()) != f.scenario.dimension()) {
    throw ValidationError("functional: beta has wrong dimension");
  }
  if (j.contains("setting_weights") && !j.at("setting_weights").is_null()) {
    f.setting_weights = vector_from_json(j.at("setting_weights"));
    if (static_cast<std::size_t>(f.setting_weights->size()) != f.scenario.settings()) {
      throw ValidationError("functional: setting_weights has wrong dimension");
    }
  }
  if (j.contains("local_bound") && !j.at("local_bound").is_null()) f.local_bound = j.at("local_bound").get<double>();
  return f;
}

std::optional<double> threshold_from_json(const json& j) {
  if (j.contains("threshold") && !j.at("threshold").is_null()) return j.at("threshold").get<double>();
  return std::nullopt;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Behavior load_behavior(const std::string& name_or_path) {
  for (const auto& n : canonical_names()) {
    if (n == name_or_path) return canonical_distribution(n);
  }
  const json j = read_json(name_or_path);
  if (j.contains("p")) return behavior_from_json(j);
  if (j.contains("counts")) return frequencies_from_json(j).relative_frequencies();
  throw ValidationError("'" + name_or_path + "' holds neither 'p' nor 'counts'");
}

FrequencyTable load_frequencies(const std::string& name_or_path, std::int64_t n_per_setting) {
  const bool is_name = std::find(canonical_names().begin(), canonical_names().end(), name_or_path) !=
                       canonical_names().end();
  if (!is_name) {
    const json j = read_json(name_or_path);
    if (j.contains("counts")) return frequencies_from_json(j);
  }
  if (n_per_setting <= 0) {
    throw ValidationError("'" + name_or_path + "' is not a counts file; give a trial count to discretize it");
  }
  return FrequencyTable::from_behavior(load_behavior(name_or_path), n_per_setting);
}

BellFunctional load_functional(const std::string& name_or_path) {
  for (const char* n : {"chsh", "tau125", "mdl"}) {
    if (name_or_path == n) return functional_by_name(n);
  }
  return functional_from_json(read_json(name_or_path));
}

}  // namespace direg
