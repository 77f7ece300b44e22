#pragma once

#include "webcomm/core/encoding.hpp"
#include "webcomm/core/endpoint.hpp"

#include <functional>
#include <memory>
#include <span>

namespace webcomm {

/// Invoked from the network's own execution context (a receive thread for
/// real sockets, the simulator loop otherwise). Must not block.
using ReceiveHandler = std::function<void(const Endpoint& from, Bytes data)>;

class DatagramSocket {
 public:
  virtual ~DatagramSocket() = default;
  virtual Endpoint local() const = 0;
  virtual void send_to(const Endpoint& to, std::span<const std::uint8_t> data) = 0;
};

class StreamConnection {
 public:
  virtual ~StreamConnection() = default;
  virtual Endpoint local() const = 0;
  virtual Endpoint remote() const = 0;
  virtual void send(std::span<const std::uint8_t> data) = 0;
};

/// Socket factory the adaptor and gateway are written against, so that the
/// NAT simulator can stand in for the host stack.
class Network {
 public:
  virtual ~Network() = default;
  /// Port 0 picks a free port above 1024. Throws ApiError(409) if taken.
  virtual std::unique_ptr<DatagramSocket> bind_udp(const Endpoint& requested, ReceiveHandler on_receive) = 0;
  /// Outbound TCP. Throws ApiError(409) when unsupported, 502 on connect failure.
  virtual std::unique_ptr<StreamConnection> connect_tcp(const Endpoint& remote, ReceiveHandler on_receive) = 0;
};

/// Real POSIX sockets, one receive thread per socket.
class SystemNetwork final : public Network {
 public:
  std::unique_ptr<DatagramSocket> bind_udp(const Endpoint& requested, ReceiveHandler on_receive) override;
  std::unique_ptr<StreamConnection> connect_tcp(const Endpoint& remote, ReceiveHandler on_receive) override;
};

}  // namespace webcomm
