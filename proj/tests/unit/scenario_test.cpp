#include "webcomm/sim/scenario.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace webcomm::sim;
using nlohmann::json;

namespace {

std::filesystem::path scenarios() { return WEBCOMM_SCENARIOS; }

json load(const std::string& name) {
  std::ifstream in(scenarios() / name);
  return json::parse(in);
}

}  // namespace

TEST(Scenario, EmptyScriptPasses) {
  const auto r = run_scenario({{"name", "empty"}, {"steps", json::array()}});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.exit_code(), 0);
}

TEST(Scenario, InvalidScriptsThrow) {
  EXPECT_THROW(run_scenario({{"steps", {{{"op", "dance"}}}}}), ScenarioError);
  EXPECT_THROW(run_scenario({{"steps", {{{"op", "login"}, {"phone", "nobody"}}}}}), ScenarioError);
  EXPECT_THROW(run_scenario(json::array()), ScenarioError);
}

TEST(Scenario, FailedWaitStopsTheRun) {
  const json script = {{"steps",
                        {{{"op", "spawn"}, {"name", "alice"}, {"aor", "alice@example.net"}, {"host", "192.0.2.10"}},
                         {{"op", "wait-for-state"}, {"phone", "alice"}, {"state", "online"}, {"timeout_ms", 200}},
                         {{"op", "login"}, {"phone", "alice"}}}}};
  const auto r = run_scenario(script);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.exit_code(), 1);
}

TEST(Scenario, Fig2IsDeterministic) {
  const auto script = load("fig2.json");
  const auto a = run_scenario(script, scenarios());
  const auto b = run_scenario(script, scenarios());
  EXPECT_TRUE(a.pass) << a.json.dump(2);
  EXPECT_EQ(a.json, b.json);
}

TEST(Scenario, DenyAllFailsOnMediaOnly) {
  const auto r = run_scenario(load("nat_deny_all.json"), scenarios());
  EXPECT_FALSE(r.pass);
  for (const auto& a : r.json["asserts"]) {
    const auto obs = a["observable"].get<std::string>();
    if (obs == "event" || obs == "participants" || obs == "counter") {
      EXPECT_EQ(a["outcome"], "pass") << a.dump();
    }
    if (obs == "media") EXPECT_EQ(a["outcome"], "fail");
  }
  EXPECT_EQ(r.json["states"]["alice"]["calls"]["outgoing"]["reason"], "no-path");
}
