#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace webcomm::sim {

/// The script itself is unusable: malformed JSON, unknown op, missing field,
/// unknown phone or host, unreadable reference file.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioReport {
  bool pass = false;
  nlohmann::json json;
  /// 0 pass, 1 assertion or step failure.
  int exit_code() const { return pass ? 0 : 1; }
};

/// Runs a scripted scenario on a fresh World.
///
/// Script:
///   {"name", "seed", "step_ms", "link": {"delay_ms","loss"}, "reflector": "ip:port"|null,
///    "ids": {"contact_start","call_start"}, "steps": [{"op": ...}, ...]}
/// Ops: spawn, login, call, accept, reject, hangup, wait-for-state,
/// advance-clock, assert. A failing wait stops the run; failing asserts do
/// not. Relative reference files resolve against `base_dir`.
/// Throws ScenarioError for an invalid script.
ScenarioReport run_scenario(const nlohmann::json& script, const std::filesystem::path& base_dir = ".");
ScenarioReport run_scenario_file(const std::filesystem::path& file);

}  // namespace webcomm::sim
