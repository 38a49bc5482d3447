#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qstack/simulation.hpp"

namespace qstack {

using Json = nlohmann::json;

struct Scenario {
  std::string name;
  SimConfig config;
  Json assertions = Json::object();
};

/// Canonical scenario JSON of an experiment analog (exp1 .. exp6).
Json preset_json(std::string_view name);
const std::vector<std::string>& preset_names();

/// Applies "a.b.0.c=value"; the value is parsed as JSON when possible and
/// kept as a string otherwise. Missing objects along the path are created.
void apply_override(Json& doc, std::string_view assignment);

/// InvalidConfig on unknown keys, wrong types or inconsistent values.
Scenario scenario_from_json(const Json& doc);

Json report_to_json(const Scenario& sc, const SimReport& r);
std::string timeline_csv(const SimReport& r);
inline constexpr std::string_view kTimelineHeader = "period_end_ns,load_pct,K,M,roles,p99_high_ns,p99_low_ns,p99_all_ns,drops,eta";

/// Failed assertion descriptions; empty when all hold.
std::vector<std::string> check_assertions(const Json& assertions, const SimReport& r);

}  // namespace qstack
