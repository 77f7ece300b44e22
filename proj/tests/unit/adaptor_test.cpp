#include "adaptor_support.hpp"

#include "webcomm/adaptor/adaptor.hpp"
#include "webcomm/adaptor/api.hpp"
#include "webcomm/adaptor/approval.hpp"
#include "webcomm/core/encoding.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/sim/world.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace webcomm;
using namespace webcomm::adaptor;
using nlohmann::json;

namespace {

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ApiError& e) {
    return e.status();
  }
  return 200;
}

std::string id_of(const json& j) { return j.at("id").get<std::string>(); }

/// Two adaptors on one simulated network, each with an authenticated app.
struct TwoHosts {
  TwoHosts() {
    sim::WorldConfig cfg;
    cfg.reflector.reset();
    world = std::make_unique<sim::World>(cfg);
    for (int i = 0; i < 2; ++i) {
      auto policy = std::make_unique<ScriptedPolicy>();
      policies[i] = policy.get();
      auto& ad = world->add_host(i == 0 ? "192.0.2.1" : "192.0.2.2", std::nullopt, std::move(policy));
      adaptors[i] = &ad;
      apis[i] = std::make_unique<LocalAdaptor>(ad);
      apis[i]->authenticate("test-app", std::nullopt);
    }
  }
  std::unique_ptr<sim::World> world;
  ScriptedPolicy* policies[2]{};
  Adaptor* adaptors[2]{};
  std::unique_ptr<LocalAdaptor> apis[2];
};

}  // namespace

TEST(AdaptorAuth, FirstConnectGetsDayLongToken) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  ScriptedPolicy policy;
  Adaptor ad(net.add_host("127.0.0.1"), clock, policy);
  const auto g = ad.authenticate("app");
  ASSERT_TRUE(g.expires_at);
  EXPECT_EQ(*g.expires_at, clock.now() + std::chrono::hours(24));
  EXPECT_EQ(g.token.size(), 32u);
  EXPECT_EQ(policy.asked().size(), 1u);
}

TEST(AdaptorAuth, ReconnectWithValidTokenSkipsApproval) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  ScriptedPolicy policy;
  Adaptor ad(net.add_host("127.0.0.1"), clock, policy);
  const auto g = ad.authenticate("app");
  const auto id = ad.create_object(g.token, "Speaker", json::object())["id"];
  policy.clear();
  const auto again = ad.authenticate("app", g.token);
  EXPECT_EQ(again.token, g.token);
  EXPECT_TRUE(policy.asked().empty());
  EXPECT_EQ(ad.list_objects(again.token)["objects"][0]["id"], id);
}

TEST(AdaptorAuth, GarbageTokenPromptsAgain) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  ScriptedPolicy policy;
  Adaptor ad(net.add_host("127.0.0.1"), clock, policy);
  ad.authenticate("app");
  policy.clear();
  ad.authenticate("app", std::string("deadbeef"));
  EXPECT_EQ(policy.asked().size(), 1u);
}

TEST(AdaptorAuth, ExpiredTokenRejectedEverywhere) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  ScriptedPolicy policy;
  AdaptorConfig cfg;
  cfg.token_ttl = Millis{1000};
  Adaptor ad(net.add_host("127.0.0.1"), clock, policy, cfg);
  const auto g = ad.authenticate("app");
  clock.advance(Millis{1001});
  EXPECT_EQ(status_of([&] { ad.list_objects(g.token); }), 401);
  EXPECT_EQ(status_of([&] { ad.create_object(g.token, "Speaker", json::object()); }), 401);
  EXPECT_EQ(status_of([&] { ad.events(g.token); }), 401);
  // Expired prior token counts as a first connection.
  policy.clear();
  EXPECT_NE(ad.authenticate("app", g.token).token, g.token);
  EXPECT_EQ(policy.asked().size(), 1u);
}

TEST(AdaptorAuth, DenyIsClean403) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  StaticPolicy deny(Decision::Deny);
  Adaptor ad(net.add_host("127.0.0.1"), clock, deny);
  EXPECT_EQ(status_of([&] { ad.authenticate("app"); }), 403);
}

TEST(AdaptorAuth, AlwaysAllowGivesPermanentTokenThatSurvivesRestart) {
  const auto file = std::filesystem::temp_directory_path() / ("webcomm-tokens-" + std::to_string(::getpid()));
  std::filesystem::remove(file);
  ManualClock clock;
  sim::SimNetwork net(clock);
  StaticPolicy always(Decision::AllowAlways);
  AdaptorConfig cfg;
  cfg.token_file = file;
  std::string token;
  {
    Adaptor ad(net.add_host("127.0.0.1"), clock, always, cfg);
    const auto g = ad.authenticate("app");
    EXPECT_FALSE(g.expires_at);
    token = g.token;
  }
  StaticPolicy deny(Decision::Deny);
  cfg.bind_address = "127.0.0.2";
  Adaptor again(net.add_host("127.0.0.2"), clock, deny, cfg);
  EXPECT_EQ(again.authenticate("app", token).token, token);
  std::filesystem::remove(file);
}

TEST(AdaptorObjects, UdpPortRules) {
  TwoHosts h;
  const auto udp = h.apis[0]->create_object("UdpTransport", {{"port", 0}});
  EXPECT_GT(h.apis[0]->invoke(id_of(udp), "stats", json::object())["local_port"].get<int>(), 1024);
  EXPECT_EQ(status_of([&] { h.apis[0]->create_object("UdpTransport", {{"port", 80}}); }), 400);
  EXPECT_EQ(status_of([&] { h.apis[0]->create_object("Nonsense", json::object()); }), 400);
}

TEST(AdaptorObjects, RtpMembersAreAdjacentPorts) {
  TwoHosts h;
  const auto rtp = h.apis[0]->create_object("RtpTransport", json::object());
  const auto st = h.apis[0]->invoke(id_of(rtp), "stats", json::object());
  const auto rtp_udp = h.apis[0]->invoke(st["rtp_transport"], "state", json::object());
  const auto rtcp_udp = h.apis[0]->invoke(st["rtcp_transport"], "state", json::object());
  EXPECT_EQ(rtcp_udp["local_port"].get<int>(), rtp_udp["local_port"].get<int>() + 1);
  EXPECT_EQ(rtp_udp["local_port"], st["rtp_port"]);
  EXPECT_EQ(rtp_udp["local_port"].get<int>() % 2, 0);
}

TEST(AdaptorObjects, UdpSendCountsBytesAndRecvEvent) {
  TwoHosts h;
  auto events = h.apis[1]->events();
  const auto a = id_of(h.apis[0]->create_object("UdpTransport", {{"port", 0}}));
  const auto b = id_of(h.apis[1]->create_object("UdpTransport", {{"port", 0}}));
  const int port_b = h.apis[1]->invoke(b, "stats", json::object())["local_port"];
  const std::string to = "192.0.2.2:" + std::to_string(port_b);
  const auto r = h.apis[0]->invoke(a, "send", {{"to", to}, {"data", base64_encode(to_bytes("hello"))}});
  EXPECT_EQ(r["queued"], true);
  EXPECT_EQ(h.apis[0]->invoke(a, "stats", json::object())["bytes_out"], 5);
  h.world->run_for(Millis{100});
  bool seen = false;
  for (const auto& f : events->queue().drain()) {
    if (f["type"] != "udp-recv") continue;
    seen = true;
    EXPECT_EQ(f["resource"], "/objects/" + b);
    EXPECT_EQ(to_string(base64_decode(f["payload"]["data"].get<std::string>())), "hello");
    EXPECT_EQ(f["payload"]["from"].get<std::string>().rfind("192.0.2.1:", 0), 0u);
  }
  EXPECT_TRUE(seen);
}

TEST(AdaptorObjects, ForeignTokenGets403) {
  TwoHosts h;
  LocalAdaptor other(*h.adaptors[0]);
  other.authenticate("other-app", std::nullopt);
  const auto id = id_of(h.apis[0]->create_object("Speaker", json::object()));
  EXPECT_EQ(status_of([&] { other.invoke(id, "stats", json::object()); }), 403);
  EXPECT_EQ(status_of([&] { other.close_object(id); }), 403);
  EXPECT_TRUE(other.list_objects()["objects"].empty());
}

TEST(AdaptorObjects, ConnectRules) {
  TwoHosts h;
  auto& api = *h.apis[0];
  const auto cam = id_of(api.create_object("Camera", json::object()));
  const auto spk = id_of(api.create_object("Speaker", json::object()));
  EXPECT_EQ(status_of([&] { api.invoke(cam, "connect", {{"sink", spk}}); }), 409);
  const auto mic = id_of(api.create_object("Microphone", json::object()));
  api.close_object(mic);
  EXPECT_EQ(status_of([&] { api.invoke(mic, "connect", {{"sink", spk}}); }), 404);
}

TEST(AdaptorObjects, CloseReleasesPortsAndMembers) {
  TwoHosts h;
  auto& api = *h.apis[0];
  const auto udp = id_of(api.create_object("UdpTransport", {{"port", 20000}}));
  EXPECT_NE(status_of([&] { api.create_object("UdpTransport", {{"port", 20000}}); }), 200);
  api.close_object(udp);
  EXPECT_EQ(status_of([&] { api.create_object("UdpTransport", {{"port", 20000}}); }), 200);
  EXPECT_EQ(status_of([&] { api.close_object(udp); }), 404);

  const auto rtp = id_of(api.create_object("RtpTransport", json::object()));
  const auto st = api.invoke(rtp, "stats", json::object());
  EXPECT_EQ(status_of([&] { api.close_object(st["rtp_transport"]); }), 409);
  api.close_object(rtp);
  EXPECT_EQ(status_of([&] { api.invoke(st["rtp_transport"], "state", json::object()); }), 404);
  EXPECT_EQ(status_of([&] { api.invoke(st["rtcp_transport"], "state", json::object()); }), 404);
  EXPECT_EQ(status_of([&] { api.create_object("UdpTransport", {{"port", st["rtp_port"]}}); }), 200);
  EXPECT_EQ(status_of([&] { api.create_object("UdpTransport", {{"port", st["rtcp_port"]}}); }), 200);
}

TEST(AdaptorIce, SendBeforeConnected409AndPhasesInOrder) {
  TwoHosts h;
  std::string ice[2];
  std::unique_ptr<EventStream> ev[2];
  for (int i = 0; i < 2; ++i) {
    ev[i] = h.apis[i]->events();
    const auto rtp = id_of(h.apis[i]->create_object("RtpTransport", json::object()));
    ice[i] = id_of(h.apis[i]->create_object("IceTransport", {{"components", {rtp}}}));
    h.apis[i]->invoke(ice[i], "gather", json::object());
  }
  h.world->run_for(Millis{50});
  json cands[2];
  for (int i = 0; i < 2; ++i) cands[i] = h.apis[i]->invoke(ice[i], "stats", json::object())["local_candidates"];
  for (int i = 0; i < 2; ++i) h.apis[i]->invoke(ice[i], "run", {{"candidates", cands[1 - i]}});
  EXPECT_EQ(status_of([&] { h.apis[0]->invoke(ice[0], "send", {{"data", "aGk="}}); }), 409);
  h.world->run_until([&] { return h.apis[0]->invoke(ice[0], "stats", json::object())["phase"] == "connected"; },
                     Millis{5000});
  std::vector<std::string> phases;
  for (const auto& f : ev[0]->queue().drain()) {
    if (f["type"] == "ice-phase") phases.push_back(f["payload"]["phase"]);
  }
  EXPECT_EQ(phases, (std::vector<std::string>{"gathering", "gathered", "checking", "connected"}));
  EXPECT_EQ(h.apis[0]->invoke(ice[0], "send", {{"data", "aGk="}})["queued"], true);
}

TEST(AdaptorMedia, ToneThroughRtpReachesSpeakerAtFrameRate) {
  TwoHosts h;
  auto& a = *h.apis[0];
  auto& b = *h.apis[1];
  const auto mic = id_of(a.create_object("Microphone", {{"codec", "tone"}, {"start", false}}));
  const auto rtp_a = id_of(a.create_object("RtpTransport", json::object()));
  const auto rtp_b = id_of(b.create_object("RtpTransport", json::object()));
  const auto spk = id_of(b.create_object("Speaker", json::object()));
  const int port_b = b.invoke(rtp_b, "stats", json::object())["rtp_port"];
  a.invoke(rtp_a, "set_remote", {{"remote", "192.0.2.2:" + std::to_string(port_b)}});
  a.invoke(mic, "connect", {{"sink", rtp_a}});
  b.invoke(rtp_b, "connect", {{"sink", spk}});
  a.invoke(mic, "start", json::object());
  h.world->run_for(Millis{5000});
  const auto frames = b.invoke(spk, "stats", json::object())["frames"].get<int>();
  // 50 fps for 5 s, less the in-flight tail; tolerance 1 frame per second.
  EXPECT_NEAR(frames, 250, 5);
  EXPECT_EQ(b.invoke(spk, "stats", json::object())["gaps"], 0);
}

TEST(AdaptorApproval, DeniedSendPutsNothingOnTheWire) {
  RulePolicy rules(Decision::AllowOnce, {{ApprovalKind::SendToNewPeer, std::nullopt, std::nullopt, Decision::Deny}});
  ManualClock clock;
  sim::SimNetwork net(clock);
  AdaptorConfig cfg;
  cfg.bind_address = "192.0.2.9";
  Adaptor strict(net.add_host("192.0.2.9"), clock, rules, cfg);
  const auto g = strict.authenticate("app");
  const auto u = strict.create_object(g.token, "UdpTransport", {{"port", 0}})["id"].get<std::string>();
  EXPECT_EQ(status_of([&] { strict.invoke(g.token, u, "send", {{"to", "192.0.2.1:9"}, {"data", "aGk="}}); }), 403);
  EXPECT_EQ(strict.datagrams_sent(), 0u);
  EXPECT_EQ(net.counters("192.0.2.9").out_injected, 0u);
  EXPECT_EQ(strict.invoke(g.token, u, "stats", json::object())["bytes_out"], 0);
}

TEST(AdaptorApproval, EachDecisionAskedOncePerSubject) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  ScriptedPolicy policy;
  AdaptorConfig cfg;
  cfg.bind_address = "192.0.2.9";
  Adaptor ad(net.add_host("192.0.2.9"), clock, policy, cfg);
  const auto g = ad.authenticate("app");
  const auto u = ad.create_object(g.token, "UdpTransport", {{"port", 0}})["id"].get<std::string>();
  for (int i = 0; i < 3; ++i) ad.invoke(g.token, u, "send", {{"to", "192.0.2.1:9"}, {"data", "aGk="}});
  ad.invoke(g.token, u, "send", {{"to", "192.0.2.2:9"}, {"data", "aGk="}});
  int sends = 0;
  for (const auto& r : policy.asked()) sends += r.kind == ApprovalKind::SendToNewPeer;
  EXPECT_EQ(sends, 2);
  EXPECT_EQ(ad.datagrams_sent(), 4u);
}

TEST(AdaptorApproval, RulePolicyFromJson) {
  const auto p = RulePolicy::from_json(json::parse(R"({"default":"deny","rules":[
    {"kind":"app-connect","decision":"allow-always"},
    {"kind":"send-to-new-peer","subject":"192.0.2.1","decision":"allow-once"}]})"));
  RulePolicy copy = p;
  EXPECT_EQ(copy.decide({ApprovalKind::AppConnect, "x", ""}), Decision::AllowAlways);
  EXPECT_EQ(copy.decide({ApprovalKind::SendToNewPeer, "x", "192.0.2.1"}), Decision::AllowOnce);
  EXPECT_EQ(copy.decide({ApprovalKind::SendToNewPeer, "x", "192.0.2.2"}), Decision::Deny);
}

TEST(AdaptorApproval, PromptPolicyReadsAnswers) {
  std::istringstream in("d\nalways\n");
  std::ostringstream out;
  PromptPolicy p(in, out);
  EXPECT_EQ(p.decide({ApprovalKind::Bind, "app", ""}), Decision::Deny);
  EXPECT_EQ(p.decide({ApprovalKind::Bind, "app", ""}), Decision::AllowAlways);
  EXPECT_NE(out.str().find("app"), std::string::npos);
}

TEST(AdaptorSecurity, ScopeIsolationSample) {
  webcomm::testing::ScopeStats stats;
  const auto r = webcomm::testing::check_scope_isolation(60, 42, &stats);
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_GT(stats.foreign_attempts, 0);
}

TEST(AdaptorSecurity, DenyAllSendsNothing) {
  const auto r = webcomm::testing::check_deny_all();
  EXPECT_TRUE(r.ok) << r.detail;
}
