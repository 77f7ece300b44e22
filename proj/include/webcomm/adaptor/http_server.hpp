#pragma once

#include "webcomm/adaptor/adaptor.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace webcomm::adaptor {

/// Loopback-only HTTP/1.1 front-end for an Adaptor, plus the bundled
/// widgets served as static files under /widgets/.
class AdaptorHttpServer {
 public:
  AdaptorHttpServer(Adaptor& adaptor, std::optional<std::filesystem::path> widgets_dir = std::nullopt);
  ~AdaptorHttpServer();

  /// Throws std::invalid_argument for a non-loopback host. Port 0 picks a
  /// free one. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  void start();
  void stop();

 private:
  void routes();

  Adaptor& adaptor_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  bool running_ = false;
};

}  // namespace webcomm::adaptor
