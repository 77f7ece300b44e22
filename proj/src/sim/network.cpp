#include "webcomm/sim/network.hpp"

#include "webcomm/adaptor/ice.hpp"
#include "webcomm/core/error.hpp"

#include <stdexcept>

namespace webcomm::sim {

class SimNetwork::Socket final : public DatagramSocket {
 public:
  Socket(SimNetwork& net, Host& host, Endpoint local, ReceiveHandler handler)
      : net_(net), host_(host), local_(std::move(local)), handler_(std::move(handler)) {}
  ~Socket() override;

  Endpoint local() const override { return local_; }
  void send_to(const Endpoint& to, std::span<const std::uint8_t> data) override { net_.send(host_, local_, to, data); }

  const ReceiveHandler& handler() const { return handler_; }

 private:
  SimNetwork& net_;
  Host& host_;
  Endpoint local_;
  ReceiveHandler handler_;
};

class SimNetwork::Host final : public Network {
 public:
  Host(SimNetwork& net, std::string ip, std::optional<NatConfig> nat) : net_(net), ip_(std::move(ip)) {
    if (nat) nat_.emplace(std::move(*nat));
  }

  std::unique_ptr<DatagramSocket> bind_udp(const Endpoint& requested, ReceiveHandler on_receive) override {
    std::lock_guard lock(net_.mu_);
    if (!requested.address.empty() && requested.address != ip_ && requested.address != "0.0.0.0") {
      fail(400, "host " + ip_ + " has no address " + requested.address);
    }
    std::uint16_t port = requested.port;
    if (port == 0) {
      while (sockets_.count(next_port_)) ++next_port_;
      port = next_port_++;
    } else if (sockets_.count(port)) {
      fail(409, "port " + std::to_string(port) + " in use");
    }
    auto socket = std::make_unique<Socket>(net_, *this, Endpoint{ip_, port}, std::move(on_receive));
    sockets_[port] = socket.get();
    return socket;
  }

  std::unique_ptr<StreamConnection> connect_tcp(const Endpoint&, ReceiveHandler) override {
    fail(409, "TCP is not simulated");
  }

  const std::string& ip() const { return ip_; }
  std::optional<NatModel>& nat() { return nat_; }
  std::map<std::uint16_t, Socket*>& sockets() { return sockets_; }
  HostCounters counters;

 private:
  SimNetwork& net_;
  std::string ip_;
  std::optional<NatModel> nat_;
  std::map<std::uint16_t, Socket*> sockets_;
  std::uint16_t next_port_ = 20000;
};

SimNetwork::Socket::~Socket() {
  std::lock_guard lock(net_.mu_);
  auto& sockets = host_.sockets();
  if (auto it = sockets.find(local_.port); it != sockets.end() && it->second == this) sockets.erase(it);
}

SimNetwork::SimNetwork(const Clock& clock, LinkConfig link) : clock_(clock), link_(link), rng_(link.seed) {}

SimNetwork::~SimNetwork() = default;

Network& SimNetwork::add_host(const std::string& ip, std::optional<NatConfig> nat) {
  std::lock_guard lock(mu_);
  if (hosts_.count(ip)) throw std::invalid_argument("duplicate host " + ip);
  auto& h = hosts_[ip];
  h = std::make_unique<Host>(*this, ip, std::move(nat));
  return *h;
}

Network& SimNetwork::host(const std::string& ip) {
  std::lock_guard lock(mu_);
  return *hosts_.at(ip);
}

void SimNetwork::add_reflector(const Endpoint& at) {
  std::lock_guard lock(mu_);
  reflector_ = at;
}

SimNetwork::Host* SimNetwork::host_for_public(const std::string& address) {
  for (auto& [ip, h] : hosts_) {
    if (h->nat() ? h->nat()->config().public_ip == address : ip == address) return h.get();
  }
  return nullptr;
}

void SimNetwork::send(Host& host, const Endpoint& local, const Endpoint& to, std::span<const std::uint8_t> data) {
  std::lock_guard lock(mu_);
  const auto now = clock_.now();
  ++host.counters.out_injected;
  Endpoint src = local;
  if (host.nat() && to.address != host.ip()) src = host.nat()->outbound(local, to, now);
  if (link_.loss > 0.0 && std::bernoulli_distribution(link_.loss)(rng_)) {
    ++host.counters.out_dropped;
    return;
  }
  in_flight_.push({now + link_.delay, order_++, host.ip(), src, to, Bytes(data.begin(), data.end())});
}

void SimNetwork::reflect(const InFlight& packet) {
  auto msg = ice::decode_check(packet.data);
  if (!msg || msg->type != "bind") return;
  const auto reply = ice::encode_check({"mapped", msg->txid, packet.src});
  in_flight_.push({clock_.now() + link_.delay, order_++, std::string(), *reflector_, packet.src,
                   Bytes(reply.begin(), reply.end())});
}

void SimNetwork::deliver_due() {
  struct Ready {
    ReceiveHandler handler;
    Endpoint from;
    Bytes data;
  };
  for (;;) {
    std::vector<Ready> ready;
    {
      std::lock_guard lock(mu_);
      const auto now = clock_.now();
      while (!in_flight_.empty() && in_flight_.top().at <= now) {
        InFlight p = in_flight_.top();
        in_flight_.pop();
        Host* sender = p.from_host.empty() ? nullptr : hosts_.at(p.from_host).get();
        auto dropped = [&] {
          if (sender) ++sender->counters.out_dropped;
        };
        if (reflector_ && p.dst == *reflector_) {
          if (sender) ++sender->counters.out_delivered;
          reflect(p);
          continue;
        }
        Host* target = nullptr;
        Endpoint internal = p.dst;
        if (sender && p.dst.address == sender->ip()) {
          target = sender;
        } else {
          target = host_for_public(p.dst.address);
        }
        if (!target) {
          dropped();
          ++dropped_elsewhere_;
          continue;
        }
        ++target->counters.in_injected;
        if (target != sender && target->nat()) {
          auto mapped = target->nat()->inbound(p.dst, p.src, now);
          if (!mapped) {
            ++target->counters.in_dropped;
            dropped();
            continue;
          }
          internal = *mapped;
        }
        auto sit = target->sockets().find(internal.port);
        if (sit == target->sockets().end()) {
          ++target->counters.in_dropped;
          dropped();
          continue;
        }
        ++target->counters.in_delivered;
        if (sender) ++sender->counters.out_delivered;
        ready.push_back({sit->second->handler(), p.src, std::move(p.data)});
      }
    }
    if (ready.empty()) return;
    for (auto& r : ready) {
      if (r.handler) r.handler(r.from, std::move(r.data));
    }
  }
}

bool SimNetwork::idle() const {
  std::lock_guard lock(mu_);
  return in_flight_.empty();
}

HostCounters SimNetwork::counters(const std::string& ip) const {
  std::lock_guard lock(mu_);
  return hosts_.at(ip)->counters;
}

std::uint64_t SimNetwork::total_injected() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [ip, h] : hosts_) n += h->counters.out_injected;
  return n;
}

std::uint64_t SimNetwork::total_delivered() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [ip, h] : hosts_) n += h->counters.in_delivered;
  return n;
}

std::uint64_t SimNetwork::total_dropped() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [ip, h] : hosts_) n += h->counters.out_dropped;
  return n;
}

const NatModel* SimNetwork::nat(const std::string& ip) const {
  std::lock_guard lock(mu_);
  const auto& h = hosts_.at(ip);
  return h->nat() ? &*h->nat() : nullptr;
}

}  // namespace webcomm::sim
