#include "webcomm/adaptor/api.hpp"
#include "webcomm/adaptor/http_server.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/signaling/api.hpp"
#include "webcomm/signaling/http_server.hpp"
#include "webcomm/signaling/store.hpp"
#include "webcomm/sim/network.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

using namespace webcomm;
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

json udp_body() {
  return {{"candidates", {{{"kind", "udp"}, {"address", "192.0.2.10"}, {"port", 5060}, {"priority", 1}}}}};
}

struct SignalingRig {
  SignalingRig() : service(clock, std::make_unique<signaling::MemoryStore>(), std::make_unique<signaling::SequentialIds>(2, 123)), server(service) {
    port = server.bind("127.0.0.1", 0);
    server.start();
  }
  ~SignalingRig() { server.stop(); }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
  SystemClock clock;
  signaling::SignalingService service;
  signaling::SignalingHttpServer server;
  int port = -1;
};

}  // namespace

TEST(SignalingHttp, WrongSecretIs401) {
  SignalingRig rig;
  ASSERT_GT(rig.port, 0);
  signaling::HttpSignaling api(rig.url());
  EXPECT_EQ(status_of([&] { api.authenticate("alice@example.net", "nope"); }), 401);
  EXPECT_EQ(status_of([&] { api.create_call(); }), 401);
}

TEST(SignalingHttp, RegisterSubscribeNotifyRoundTrip) {
  SignalingRig rig;
  signaling::HttpSignaling alice(rig.url()), bob(rig.url());
  alice.authenticate("alice@example.net", "webcomm");
  bob.authenticate("bob@example.net", "webcomm");
  const auto reg = bob.register_contact("bob@example.net", udp_body());
  EXPECT_EQ(reg["contact_path"], "/login/bob@example.net/c2");
  auto stream = bob.subscribe("/login/bob@example.net");
  const auto call = alice.create_call();
  alice.notify("/login/bob@example.net", {{"type", "invitation"},
                                           {"conference", call["call_path"]},
                                           {"time", 1},
                                           {"return", "/login/alice@example.net"}});
  std::optional<json> frame;
  for (int i = 0; i < 20 && !frame; ++i) {
    auto f = stream->queue().pop(std::chrono::milliseconds(250));
    if (f && (*f)["type"] == "invitation") frame = f;
  }
  ASSERT_TRUE(frame);
  EXPECT_EQ((*frame)["resource"], "/login/bob@example.net");
  EXPECT_EQ((*frame)["payload"]["conference"], call["call_path"]);
  EXPECT_TRUE(frame->contains("seq"));
  EXPECT_TRUE(frame->contains("timestamp"));
  stream->close();

  const auto login = alice.get_login("bob@example.net");
  EXPECT_EQ(login["online"], true);
  EXPECT_EQ(status_of([&] { alice.list_logins(0, 0); }), 400);
  EXPECT_EQ(status_of([&] { alice.get_call("c999"); }), 404);
}

TEST(SignalingHttp, ErrorBodyCarriesStatusAndMessage) {
  SignalingRig rig;
  httplib::Client cli("127.0.0.1", rig.port);
  auto res = cli.Post("/call", "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 401);
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["error"]["code"], 401);
  EXPECT_TRUE(body["error"]["message"].is_string());
  res = cli.Get("/login?offset=0&limit=500");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], 400);
}

TEST(AdaptorHttp, RefusesNonLoopbackBind) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  adaptor::StaticPolicy allow(adaptor::Decision::AllowOnce);
  adaptor::Adaptor ad(net.add_host("127.0.0.1"), clock, allow);
  adaptor::AdaptorHttpServer server(ad);
  EXPECT_THROW(server.bind("0.0.0.0", 0), std::invalid_argument);
  EXPECT_THROW(server.bind("192.0.2.1", 0), std::invalid_argument);
}

TEST(AdaptorHttp, ObjectsOverHttpAndWidgets) {
  ManualClock clock;
  sim::SimNetwork net(clock);
  adaptor::StaticPolicy allow(adaptor::Decision::AllowOnce);
  adaptor::Adaptor ad(net.add_host("127.0.0.1"), clock, allow);
  adaptor::AdaptorHttpServer server(ad, std::filesystem::path(WEBCOMM_SOURCE_DIR) / "widgets");
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  server.start();
  {
    adaptor::HttpAdaptor api("http://127.0.0.1:" + std::to_string(port));
    const auto grant = api.authenticate("http-app", std::nullopt);
    EXPECT_FALSE(grant["token"].get<std::string>().empty());
    const auto spk = api.create_object("Speaker", json::object());
    const auto id = spk["id"].get<std::string>();
    EXPECT_EQ(api.invoke(id, "stats", json::object())["frames"], 0);
    EXPECT_EQ(api.list_objects()["objects"].size(), 1u);
    api.close_object(id);
    EXPECT_EQ(status_of([&] { api.invoke(id, "stats", json::object()); }), 404);
    EXPECT_EQ(status_of([&] { api.create_object("Bogus", json::object()); }), 400);

    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Get("/widgets/index.html");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_NE(res->body.find("webcomm"), std::string::npos);
  }
  server.stop();
}

TEST(AdaptorHttp, NothingListeningGives503) {
  adaptor::HttpAdaptor api("http://127.0.0.1:9");
  EXPECT_EQ(status_of([&] { api.authenticate("x", std::nullopt); }), 503);
}
