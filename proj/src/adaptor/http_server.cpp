#include "webcomm/adaptor/http_server.hpp"

#include "../core/http_server_util.hpp"

#include <stdexcept>

namespace webcomm::adaptor {

using http::guarded;
using http::send_json;

AdaptorHttpServer::AdaptorHttpServer(Adaptor& adaptor, std::optional<std::filesystem::path> widgets_dir)
    : adaptor_(adaptor), server_(std::make_unique<httplib::Server>()) {
  http::use_wide_pool(*server_);
  if (widgets_dir) server_->set_mount_point("/widgets", widgets_dir->string());
  routes();
}

AdaptorHttpServer::~AdaptorHttpServer() { stop(); }

int AdaptorHttpServer::bind(const std::string& host, int port) {
  if (host != "127.0.0.1" && host != "localhost" && host != "::1") {
    throw std::invalid_argument("the adaptor only listens on loopback, not " + host);
  }
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void AdaptorHttpServer::start() {
  running_ = true;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void AdaptorHttpServer::stop() {
  if (!running_) return;
  running_ = false;
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void AdaptorHttpServer::routes() {
  auto& svr = *server_;

  svr.Post("/auth", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = http::parse_body(req);
      std::optional<std::string> prior;
      if (body.contains("token") && body["token"].is_string()) prior = body["token"].get<std::string>();
      send_json(res, 200, to_json(adaptor_.authenticate(body.value("app_id", std::string{}), prior)));
    });
  });

  svr.Post("/objects", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = http::parse_body(req);
      const auto cls = body.value("class", std::string{});
      const auto params = body.contains("params") ? body["params"] : json::object();
      send_json(res, 201, adaptor_.create_object(http::bearer_token(req), cls, params));
    });
  });

  svr.Get("/objects", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, adaptor_.list_objects(http::bearer_token(req))); });
  });

  svr.Post(R"(/objects/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      send_json(res, 200,
                adaptor_.invoke(http::bearer_token(req), req.matches[1], req.matches[2], http::parse_body(req)));
    });
  });

  svr.Delete(R"(/objects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      adaptor_.close_object(http::bearer_token(req), req.matches[1]);
      send_json(res, 200, {{"closed", req.matches[1]}});
    });
  });

  svr.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::shared_ptr<EventStream> stream = adaptor_.events(http::bearer_token(req));
      auto queue = std::shared_ptr<EventQueue>(stream, &stream->queue());
      http::stream_ndjson(res, queue, [stream] { stream->close(); });
    });
  });
}

}  // namespace webcomm::adaptor
