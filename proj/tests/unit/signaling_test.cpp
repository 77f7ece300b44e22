#include "signaling_model.hpp"

#include "webcomm/core/clock.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/signaling/service.hpp"
#include "webcomm/signaling/store.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

using namespace webcomm;
using namespace webcomm::signaling;
using nlohmann::json;

namespace {

const std::string kAlice = "alice@example.net";
const std::string kBob = "bob@example.net";
const std::string kCarol = "carol@example.org";

json udp_body(int port = 5060) {
  return {{"candidates", {{{"kind", "udp"}, {"address", "192.0.2.10"}, {"port", port}, {"priority", 1}}}}};
}

json session(std::vector<std::string> supported = {"pcm16"}, std::vector<std::string> preferred = {"pcm16"}) {
  return {{"candidates", {{{"kind", "udp"}, {"address", "192.0.2.10"}, {"port", 40000}, {"priority", 1}}}},
          {"codecs_supported", supported},
          {"codecs_preferred", preferred}};
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ApiError& e) {
    return e.status();
  }
  return 200;
}

class ServiceTest : public ::testing::Test {
 protected:
  ManualClock clock;
  SignalingService svc{clock, std::make_unique<MemoryStore>(), std::make_unique<SequentialIds>(2, 123)};
};

}  // namespace

TEST_F(ServiceTest, RegisterGivesLoginScopedContactPath) {
  const auto r = svc.register_contact(kAlice, kAlice, udp_body());
  EXPECT_EQ(r["contact_id"], "c2");
  EXPECT_EQ(r["contact_path"], "/login/alice@example.net/c2");
}

TEST_F(ServiceTest, EmptyCandidatesRejected) {
  EXPECT_EQ(status_of([&] { svc.register_contact(kAlice, kAlice, {{"candidates", json::array()}}); }), 400);
}

TEST_F(ServiceTest, TwoRegistrationsGiveTwoContacts) {
  const auto a = svc.register_contact(kAlice, kAlice, udp_body(5060));
  const auto b = svc.register_contact(kAlice, kAlice, udp_body(5062));
  EXPECT_NE(a["contact_id"], b["contact_id"]);
  // Reference: a plain map replaying both requests.
  std::map<std::string, int> reference{{a["contact_id"], 5060}, {b["contact_id"], 5062}};
  std::map<std::string, int> seen;
  const auto login = svc.get_login(kAlice);
  for (const auto& c : login["contacts"]) seen[c["contact_id"]] = c["candidates"][0]["port"];
  EXPECT_EQ(seen, reference);
}

TEST_F(ServiceTest, RegisterNeedsAuthAndOwnership) {
  EXPECT_EQ(status_of([&] { svc.register_contact("", kAlice, udp_body()); }), 401);
  EXPECT_EQ(status_of([&] { svc.register_contact(kBob, kAlice, udp_body()); }), 403);
}

TEST_F(ServiceTest, DeleteThenGetOmitsContact) {
  svc.register_contact(kAlice, kAlice, udp_body());
  svc.register_contact(kAlice, kAlice, udp_body(6000));
  svc.unregister_contact(kAlice, kAlice, "c2");
  const auto login = svc.get_login(kAlice);
  for (const auto& c : login["contacts"]) EXPECT_NE(c["contact_id"], "c2");
  EXPECT_EQ(status_of([&] { svc.unregister_contact(kAlice, kAlice, "c2"); }), 404);
}

TEST_F(ServiceTest, PutIsReadYourWrite) {
  svc.register_contact(kAlice, kAlice, udp_body());
  svc.update_contact(kAlice, kAlice, "c2", udp_body(5062));
  EXPECT_EQ(svc.get_login(kAlice)["contacts"][0]["candidates"][0]["port"], 5062);
  const auto once = svc.snapshot();
  svc.update_contact(kAlice, kAlice, "c2", udp_body(5062));
  EXPECT_EQ(svc.snapshot(), once);
}

TEST_F(ServiceTest, ExpiryIsClamped) {
  const auto t0 = to_seconds(clock.now());
  auto r = svc.register_contact(kAlice, kAlice, {{"candidates", udp_body()["candidates"]}, {"expires_seconds", 5}});
  EXPECT_DOUBLE_EQ(r["expires_at"].get<double>(), t0 + 60);
  r = svc.register_contact(kBob, kBob, {{"candidates", udp_body()["candidates"]}, {"expires_seconds", 1e7}});
  EXPECT_DOUBLE_EQ(r["expires_at"].get<double>(), t0 + 86400);
  r = svc.register_contact(kCarol, kCarol, udp_body());
  EXPECT_DOUBLE_EQ(r["expires_at"].get<double>(), t0 + 3600);
}

TEST_F(ServiceTest, ListLoginsEmpty) {
  const auto r = svc.list_logins(0, 20);
  EXPECT_EQ(r["total"], 0);
  EXPECT_TRUE(r["items"].empty());
}

TEST_F(ServiceTest, ListLoginsPaging) {
  for (int i = 0; i < 25; ++i) {
    const auto aor = "user" + std::to_string(i) + "@example.net";
    svc.register_contact(aor, aor, udp_body());
  }
  const auto r = svc.list_logins(20, 10);
  EXPECT_EQ(r["total"], 25);
  EXPECT_EQ(r["items"].size(), 5u);
  EXPECT_EQ(status_of([&] { svc.list_logins(0, 101); }), 400);
  EXPECT_EQ(status_of([&] { svc.list_logins(-1, 10); }), 400);
}

TEST_F(ServiceTest, ListLoginsMiddleOfThree) {
  std::vector<std::string> aors{kCarol, kAlice, kBob};
  for (const auto& a : aors) svc.register_contact(a, a, udp_body());
  std::sort(aors.begin(), aors.end());
  EXPECT_EQ(svc.list_logins(1, 1)["items"], json::array({aors[1]}));
}

TEST_F(ServiceTest, PaginationConcatenatesToFullList) {
  std::vector<std::string> all;
  for (int i = 0; i < 13; ++i) {
    const auto aor = "u" + std::to_string(i * 7 % 13) + "@example.net";
    svc.register_contact(aor, aor, udp_body());
    all.push_back(aor);
  }
  std::sort(all.begin(), all.end());
  for (int k = 1; k <= 14; ++k) {
    std::vector<std::string> pages;
    for (int off = 0; off < 13; off += k) {
      const auto page = svc.list_logins(off, k);
      for (const auto& a : page["items"]) pages.push_back(a);
    }
    EXPECT_EQ(pages, all) << "k=" << k;
  }
}

TEST_F(ServiceTest, GetLoginStatuses) {
  EXPECT_EQ(status_of([&] { svc.get_login(kBob); }), 404);
  svc.register_contact(kAlice, kAlice, {{"candidates", udp_body()["candidates"]}, {"expires_seconds", 60}});
  EXPECT_EQ(svc.get_login(kAlice)["contacts"].size(), 1u);
  clock.advance(Millis{61000});
  EXPECT_EQ(status_of([&] { svc.get_login(kAlice); }), 404);
}

TEST_F(ServiceTest, CreateAndJoinCall) {
  const auto call = svc.create_call(kAlice);
  EXPECT_EQ(call["call_id"], "c123");
  svc.join_call(kAlice, "c123", session());
  EXPECT_EQ(svc.get_call("c123")["participants"].size(), 1u);
}

TEST_F(ServiceTest, JoinRejectsPreferredOutsideSupported) {
  svc.create_call(kAlice);
  EXPECT_EQ(status_of([&] { svc.join_call(kAlice, "c123", session({"pcm16"}, {"x"})); }), 400);
}

TEST_F(ServiceTest, TwoJoinsGiveSequencedMembershipEvents) {
  svc.create_call(kAlice);
  svc.join_call(kAlice, "c123", session());
  auto sub = svc.subscribe(kAlice, "/call/c123");
  auto first = sub->queue->drain();
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0]["seq"], 1);
  svc.join_call(kBob, "c123", session());
  const auto second = sub->queue->drain();
  ASSERT_EQ(second.size(), 1u);
  EXPECT_EQ(second[0]["seq"], 2);
  EXPECT_EQ(second[0]["type"], "membership-change");
  EXPECT_EQ(second[0]["payload"]["participants"].size(), 2u);
}

TEST_F(ServiceTest, ThirdJoinListsThree) {
  svc.create_call(kAlice);
  svc.join_call(kAlice, "c123", session());
  auto sub = svc.subscribe(kAlice, "/call/c123");
  svc.join_call(kBob, "c123", session());
  svc.join_call(kCarol, "c123", session());
  const auto frames = sub->queue->drain();
  EXPECT_EQ(frames.back()["payload"]["participants"].size(), 3u);
  EXPECT_EQ(frames.back()["payload"]["participants"], svc.get_call("c123")["participants"]);
}

TEST_F(ServiceTest, LeaveAndGrace) {
  svc.create_call(kAlice);
  const auto pid = svc.join_call(kAlice, "c123", session())["participant_id"].get<std::string>();
  EXPECT_EQ(status_of([&] { svc.leave_call(kAlice, "c123", "p9"); }), 404);
  svc.leave_call(kAlice, "c123", pid);
  EXPECT_TRUE(svc.get_call("c123")["participants"].empty());
  clock.advance(Millis{29000});
  svc.reap();
  EXPECT_EQ(status_of([&] { svc.get_call("c123"); }), 200);
  clock.advance(Millis{2000});
  svc.reap();
  EXPECT_EQ(status_of([&] { svc.get_call("c123"); }), 404);
}

TEST_F(ServiceTest, SubscribeOwnershipAndNotify) {
  svc.register_contact(kAlice, kAlice, udp_body());
  svc.register_contact(kBob, kBob, udp_body());
  EXPECT_EQ(status_of([&] { svc.subscribe(kAlice, "/login/" + kBob); }), 403);
  auto bob = svc.subscribe(kBob, "/login/" + kBob);
  const json invite = {{"type", "invitation"},
                       {"conference", "/call/c123"},
                       {"time", 1.0},
                       {"return", "/login/alice@example.net"}};
  EXPECT_EQ(svc.notify(kAlice, "/login/" + kBob, invite)["delivered"], 1);
  svc.notify(kAlice, "/login/" + kBob, {{"type", "cancellation"}, {"conference", "/call/c123"}});
  const auto frames = bob->queue->drain();
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0]["type"], "invitation");
  EXPECT_EQ(frames[0]["payload"]["return"], "/login/alice@example.net");
  EXPECT_EQ(frames[1]["type"], "cancellation");
  EXPECT_EQ(frames[1]["seq"].get<int>(), frames[0]["seq"].get<int>() + 1);
}

TEST_F(ServiceTest, NotifyWithoutSubscribers) {
  svc.register_contact(kBob, kBob, udp_body());
  const auto r = svc.notify(kAlice, "/login/" + kBob, {{"type", "invitation"}, {"conference", "/call/c123"}, {"time", 1.0}, {"return", "/login/" + kAlice}});
  EXPECT_EQ(r["delivered"], 0);
}

TEST_F(ServiceTest, FrameShape) {
  svc.register_contact(kAlice, kAlice, udp_body());
  auto sub = svc.subscribe(kAlice, "/login/" + kAlice);
  svc.register_contact(kAlice, kAlice, udp_body(6000));
  const auto f = sub->queue->drain().at(0);
  for (const char* k : {"seq", "type", "resource", "timestamp", "payload"}) EXPECT_TRUE(f.contains(k)) << k;
  EXPECT_EQ(f["resource"], "/login/" + kAlice);
}

TEST_F(ServiceTest, GetsArePure) {
  svc.register_contact(kAlice, kAlice, udp_body());
  svc.create_call(kAlice);
  svc.join_call(kAlice, "c123", session());
  const auto before = svc.snapshot();
  svc.get_login(kAlice);
  svc.get_call("c123");
  svc.list_logins(0, 5);
  svc.list_calls();
  EXPECT_EQ(svc.snapshot(), before);
}

TEST_F(ServiceTest, AuthTokens) {
  const auto t = svc.authenticate(kAlice, "webcomm");
  EXPECT_EQ(svc.principal(t), kAlice);
  EXPECT_EQ(svc.principal("nope"), "");
  EXPECT_EQ(status_of([&] { svc.authenticate(kAlice, "wrong"); }), 401);
}

TEST(SignalingProperties, RandomSequencesMatchReference) {
  webcomm::testing::SignalingPropertyStats stats;
  const auto r = webcomm::testing::check_signaling_sequences(100, 40, 77, &stats);
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_GT(stats.frames, 0);
}

TEST(FileStore, RegistrationsSurviveRestart) {
  const auto path = std::filesystem::temp_directory_path() / ("webcomm-store-" + std::to_string(::getpid()) + ".ndjson");
  std::filesystem::remove(path);
  ManualClock clock;
  {
    SignalingService svc(clock, std::make_unique<FileStore>(path), std::make_unique<SequentialIds>());
    svc.register_contact(kAlice, kAlice, udp_body());
    svc.register_contact(kBob, kBob, udp_body());
    svc.unregister_contact(kBob, kBob, "c1");
    svc.create_call(kAlice);
    svc.join_call(kAlice, "c100", session());
  }
  SignalingService again(clock, std::make_unique<FileStore>(path), std::make_unique<SequentialIds>());
  EXPECT_EQ(again.get_login(kAlice)["contacts"].size(), 1u);
  EXPECT_EQ(status_of([&] { again.get_login(kBob); }), 404);
  EXPECT_EQ(again.get_call("c100")["participants"].size(), 1u);
  // Fresh ids never collide with replayed ones.
  EXPECT_EQ(again.register_contact(kAlice, kAlice, udp_body())["contact_id"], "c2");
  EXPECT_EQ(again.create_call(kBob)["call_id"], "c101");
  std::filesystem::remove(path);
}

TEST(FileStore, TornLastLineIsSkipped) {
  const auto path = std::filesystem::temp_directory_path() / ("webcomm-torn-" + std::to_string(::getpid()) + ".ndjson");
  std::filesystem::remove(path);
  {
    FileStore s(path);
    s.append({{"op", "x"}});
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"op\": \"half";
  }
  FileStore s(path);
  EXPECT_EQ(s.load().size(), 1u);
  std::filesystem::remove(path);
}
