#pragma once

#include "webcomm/adaptor/adaptor.hpp"
#include "webcomm/adaptor/api.hpp"
#include "webcomm/sdk/phone.hpp"
#include "webcomm/signaling/service.hpp"
#include "webcomm/sim/network.hpp"
#include "webcomm/sim/trace.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webcomm::sim {

struct WorldConfig {
  LinkConfig link;
  /// Address-discovery service for reflexive candidates; nullopt for none.
  std::optional<Endpoint> reflector = Endpoint{"198.51.100.1", 3478};
  Millis step{5};
  int contact_start = 1;
  int call_start = 100;
  /// Adaptor seeds derive from this.
  std::uint64_t seed = 1;
  ice::IceTiming ice_timing;
};

/// Signaling server, simulated network, per-host adaptors and SDK phones
/// stepped together on one virtual clock.
///
/// Each step advances the clock, delivers due datagrams, ticks every
/// adaptor and pumps every phone, so a run is a pure function of the
/// configuration and the calls made on it.
class World {
 public:
  explicit World(WorldConfig config = {});
  ~World();

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  ManualClock& clock() { return clock_; }
  SimNetwork& network() { return *network_; }
  signaling::SignalingService& service() { return *service_; }
  Trace& trace() { return trace_; }
  const WorldConfig& config() const { return config_; }

  /// Adds a host running an adaptor. `policy` defaults to allow-once.
  adaptor::Adaptor& add_host(const std::string& ip, std::optional<NatConfig> nat = std::nullopt,
                             std::unique_ptr<adaptor::ApprovalPolicy> policy = nullptr);
  bool has_host(const std::string& ip) const { return hosts_.count(ip) > 0; }
  adaptor::Adaptor& adaptor(const std::string& ip);

  /// A phone on an existing host, talking to the server through a tracing
  /// decorator.
  sdk::Phone& add_phone(const std::string& name, const std::string& host_ip, sdk::PhoneConfig config);
  bool has_phone(const std::string& name) const { return phones_.count(name) > 0; }
  sdk::Phone& phone(const std::string& name);
  const std::string& host_of(const std::string& name) const;
  adaptor::AdaptorApi& adaptor_api(const std::string& name);

  void step();
  void run_for(Millis duration);
  /// Steps until `done` holds; false on timeout.
  bool run_until(const std::function<bool()>& done, Millis timeout);
  /// Simulated time since construction.
  Millis elapsed() const { return clock_.now() - start_; }

 private:
  struct HostSlot {
    std::unique_ptr<adaptor::ApprovalPolicy> policy;
    std::unique_ptr<adaptor::Adaptor> adaptor;
  };
  struct PhoneSlot {
    std::string host;
    std::unique_ptr<signaling::LocalSignaling> signaling;
    std::unique_ptr<TracingSignaling> traced;
    std::unique_ptr<adaptor::LocalAdaptor> adaptor;
    std::unique_ptr<sdk::Phone> phone;
  };

  WorldConfig config_;
  ManualClock clock_;
  Millis start_;
  Millis next_reap_;
  Trace trace_;
  std::unique_ptr<SimNetwork> network_;
  std::unique_ptr<signaling::SignalingService> service_;
  std::map<std::string, HostSlot> hosts_;
  std::vector<std::string> host_order_;
  std::map<std::string, PhoneSlot> phones_;
  std::vector<std::string> phone_order_;
};

}  // namespace webcomm::sim
