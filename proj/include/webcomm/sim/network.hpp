#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/network.hpp"
#include "webcomm/sim/nat.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace webcomm::sim {

struct LinkConfig {
  Millis delay{10};
  /// Independent per-datagram loss probability.
  double loss = 0.0;
  std::uint64_t seed = 1;
};

/// Per-host datagram accounting. For each direction,
/// delivered + dropped == injected once the network is idle.
struct HostCounters {
  std::uint64_t out_injected = 0, out_delivered = 0, out_dropped = 0;
  std::uint64_t in_injected = 0, in_delivered = 0, in_dropped = 0;
};

/// Single-threaded datagram network over a virtual clock. Hosts are
/// either public or sit behind their own NAT; datagrams take a fixed delay
/// and may be lost. An optional reflector answers {"t":"bind"} with the
/// source address it observed.
class SimNetwork {
 public:
  SimNetwork(const Clock& clock, LinkConfig link = {});
  ~SimNetwork();

  /// `ip` is the host's own address; with a NAT it is private and only
  /// reachable through the NAT's public address.
  Network& add_host(const std::string& ip, std::optional<NatConfig> nat = std::nullopt);
  Network& host(const std::string& ip);
  void add_reflector(const Endpoint& at);

  /// Delivers every datagram due at or before clock.now().
  void deliver_due();
  /// Nothing in flight.
  bool idle() const;

  HostCounters counters(const std::string& ip) const;
  std::uint64_t total_injected() const;
  std::uint64_t total_delivered() const;
  std::uint64_t total_dropped() const;
  const NatModel* nat(const std::string& ip) const;

 private:
  class Host;
  class Socket;
  struct InFlight {
    Millis at;
    std::uint64_t order;
    std::string from_host;
    Endpoint src;
    Endpoint dst;
    Bytes data;
    bool operator>(const InFlight& o) const { return std::tie(at, order) > std::tie(o.at, o.order); }
  };

  void send(Host& host, const Endpoint& local, const Endpoint& to, std::span<const std::uint8_t> data);
  void reflect(const InFlight& packet);
  Host* host_for_public(const std::string& address);

  const Clock& clock_;
  LinkConfig link_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::map<std::string, std::unique_ptr<Host>> hosts_;
  std::optional<Endpoint> reflector_;
  std::priority_queue<InFlight, std::vector<InFlight>, std::greater<>> in_flight_;
  std::uint64_t order_ = 0;
  std::uint64_t dropped_elsewhere_ = 0;
};

}  // namespace webcomm::sim
