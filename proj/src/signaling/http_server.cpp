#include "webcomm/signaling/http_server.hpp"

#include "../core/http_server_util.hpp"

namespace webcomm::signaling {

using http::guarded;
using http::send_json;

SignalingHttpServer::SignalingHttpServer(SignalingService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  http::use_wide_pool(*server_);
  routes();
}

SignalingHttpServer::~SignalingHttpServer() { stop(); }

int SignalingHttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void SignalingHttpServer::start() {
  running_ = true;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  reaper_ = std::thread([this] {
    while (running_) {
      for (int i = 0; i < 10 && running_; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      service_.reap();
    }
  });
  server_->wait_until_ready();
}

void SignalingHttpServer::stop() {
  if (!running_.exchange(false)) return;
  server_->stop();
  if (thread_.joinable()) thread_.join();
  if (reaper_.joinable()) reaper_.join();
}

void SignalingHttpServer::routes() {
  auto& svr = *server_;
  auto caller = [this](const httplib::Request& req) { return service_.principal(http::bearer_token(req)); };

  svr.Post("/auth", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = http::parse_body(req);
      const auto aor = body.value("aor", std::string{});
      const auto token = service_.authenticate(aor, body.value("secret", std::string{}));
      send_json(res, 200, {{"token", token}, {"aor", aor}});
    });
  });

  svr.Get("/login", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto& cfg = service_.config();
      send_json(res, 200,
                service_.list_logins(http::int_param(req, "offset", 0), http::int_param(req, "limit", cfg.default_limit)));
    });
  });

  auto subscribe = [this, caller](const httplib::Request& req, httplib::Response& res, const std::string& path) {
    auto sub = service_.subscribe(caller(req), path);
    http::stream_ndjson(res, sub->queue, [this, id = sub->sub_id] { service_.unsubscribe(id); });
  };

  svr.Get(R"(/login/([^/]+))", [this, subscribe](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string aor = req.matches[1];
      if (req.get_param_value("command") == "subscribe") return subscribe(req, res, "/login/" + aor);
      send_json(res, 200, service_.get_login(aor));
    });
  });

  svr.Post(R"(/login/([^/]+))", [this, caller, subscribe](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string aor = req.matches[1];
      const auto command = req.get_param_value("command");
      if (command == "subscribe") return subscribe(req, res, "/login/" + aor);
      const auto body = http::parse_body(req);
      if (command == "notify") return send_json(res, 200, service_.notify(caller(req), "/login/" + aor, body));
      if (!command.empty()) fail(400, "unknown command " + command);
      send_json(res, 201, service_.register_contact(caller(req), aor, body));
    });
  });

  svr.Put(R"(/login/([^/]+)/([^/]+))", [this, caller](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      send_json(res, 200, service_.update_contact(caller(req), req.matches[1], req.matches[2], http::parse_body(req)));
    });
  });

  svr.Delete(R"(/login/([^/]+)/([^/]+))", [this, caller](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      service_.unregister_contact(caller(req), req.matches[1], req.matches[2]);
      send_json(res, 200, {{"deleted", true}});
    });
  });

  svr.Post("/call", [this, caller](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, service_.create_call(caller(req))); });
  });

  svr.Get("/call", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service_.list_calls()); });
  });

  svr.Get(R"(/call/([^/]+))", [this, subscribe](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      if (req.get_param_value("command") == "subscribe") return subscribe(req, res, "/call/" + id);
      send_json(res, 200, service_.get_call(id));
    });
  });

  svr.Post(R"(/call/([^/]+))", [this, caller, subscribe](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto command = req.get_param_value("command");
      if (command == "subscribe") return subscribe(req, res, "/call/" + id);
      const auto body = http::parse_body(req);
      if (command == "notify") return send_json(res, 200, service_.notify(caller(req), "/call/" + id, body));
      if (!command.empty()) fail(400, "unknown command " + command);
      send_json(res, 201, service_.join_call(caller(req), id, body));
    });
  });

  svr.Delete(R"(/call/([^/]+)/([^/]+))", [this, caller](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      service_.leave_call(caller(req), req.matches[1], req.matches[2]);
      send_json(res, 200, {{"deleted", true}});
    });
  });
}

}  // namespace webcomm::signaling
