#pragma once

#include "webcomm/signaling/service.hpp"

#include <atomic>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace webcomm::signaling {

/// HTTP/1.1 front-end for SignalingService. A background reaper drops
/// expired contacts and idle conferences once per second.
class SignalingHttpServer {
 public:
  explicit SignalingHttpServer(SignalingService& service);
  ~SignalingHttpServer();

  /// Binds; port 0 picks a free one. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  void stop();

 private:
  void routes();

  SignalingService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::thread reaper_;
  std::atomic<bool> running_{false};
};

}  // namespace webcomm::signaling
