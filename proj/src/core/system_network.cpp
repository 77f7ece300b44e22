#include "webcomm/core/error.hpp"
#include "webcomm/core/network.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <thread>

namespace webcomm {
namespace {

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  inet_pton(AF_INET, ep.address.c_str(), &sa.sin_addr);
  return sa;
}

Endpoint from_sockaddr(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
  return Endpoint{buf, ntohs(sa.sin_port)};
}

Endpoint local_of(int fd) {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return from_sockaddr(sa);
}

/// Owns a descriptor and the thread polling it.
class Poller {
 public:
  Poller(int fd, std::function<bool(int)> on_readable) : fd_(fd) {
    thread_ = std::thread([this, cb = std::move(on_readable)] {
      while (!stop_.load()) {
        pollfd p{fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, 50);
        if (r > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR))) {
          if (!cb(fd_)) break;
        }
      }
    });
  }
  ~Poller() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
    ::close(fd_);
  }
  int fd() const { return fd_; }

 private:
  int fd_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

class UdpSocket final : public DatagramSocket {
 public:
  UdpSocket(int fd, ReceiveHandler handler)
      : local_(local_of(fd)), poller_(fd, [h = std::move(handler)](int s) {
          std::uint8_t buf[65536];
          sockaddr_in from{};
          socklen_t len = sizeof from;
          const auto n = ::recvfrom(s, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
          if (n >= 0) h(from_sockaddr(from), Bytes(buf, buf + n));
          return true;
        }) {}

  Endpoint local() const override { return local_; }

  void send_to(const Endpoint& to, std::span<const std::uint8_t> data) override {
    const auto sa = to_sockaddr(to);
    ::sendto(poller_.fd(), data.data(), data.size(), 0, reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
  }

 private:
  Endpoint local_;
  Poller poller_;
};

class TcpConnection final : public StreamConnection {
 public:
  TcpConnection(int fd, Endpoint remote, ReceiveHandler handler)
      : local_(local_of(fd)), remote_(std::move(remote)),
        poller_(fd, [h = std::move(handler), r = remote_](int s) {
          std::uint8_t buf[16384];
          const auto n = ::recv(s, buf, sizeof buf, 0);
          if (n <= 0) return false;
          h(r, Bytes(buf, buf + n));
          return true;
        }) {}

  Endpoint local() const override { return local_; }
  Endpoint remote() const override { return remote_; }
  void send(std::span<const std::uint8_t> data) override {
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::send(poller_.fd(), data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw ApiError(502, "tcp send failed");
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  Endpoint local_;
  Endpoint remote_;
  Poller poller_;
};

}  // namespace

std::unique_ptr<DatagramSocket> SystemNetwork::bind_udp(const Endpoint& requested, ReceiveHandler on_receive) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw ApiError(500, std::string("socket: ") + std::strerror(errno));
    const auto sa = to_sockaddr(requested);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
      const int err = errno;
      ::close(fd);
      if (err == EADDRINUSE) throw ApiError(409, "port " + std::to_string(requested.port) + " in use");
      throw ApiError(500, std::string("bind: ") + std::strerror(err));
    }
    if (requested.port == 0 && local_of(fd).port <= 1024) {
      ::close(fd);
      continue;
    }
    return std::make_unique<UdpSocket>(fd, std::move(on_receive));
  }
  throw ApiError(500, "no ephemeral port above 1024 available");
}

std::unique_ptr<StreamConnection> SystemNetwork::connect_tcp(const Endpoint& remote, ReceiveHandler on_receive) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ApiError(500, std::string("socket: ") + std::strerror(errno));
  const auto sa = to_sockaddr(remote);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
    const int err = errno;
    ::close(fd);
    throw ApiError(502, "connect " + remote.to_string() + ": " + std::strerror(err));
  }
  return std::make_unique<TcpConnection>(fd, remote, std::move(on_receive));
}

}  // namespace webcomm
