#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/endpoint.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace webcomm::sim {

using namespace std::chrono_literals;

enum class Mapping { EndpointIndependent, AddressDependent };
/// BlockAll admits nothing inbound; it stands in for a deny-all firewall.
enum class Filtering { EndpointIndependent, AddressDependent, AddressPortDependent, BlockAll };

std::string_view to_string(Mapping m);
std::string_view to_string(Filtering f);
/// Accepts "eim"/"endpoint-independent", "adm"/"address-dependent".
Mapping mapping_from_string(std::string_view s);
/// Accepts "eif", "adf", "apdf", "block" and the long names.
Filtering filtering_from_string(std::string_view s);

struct NatConfig {
  Mapping mapping = Mapping::EndpointIndependent;
  Filtering filtering = Filtering::EndpointIndependent;
  std::string public_ip = "203.0.113.1";
  Millis binding_ttl = 30s;
  std::uint16_t first_port = 40000;
};

/// Address translation and inbound filtering for one NAT box.
class NatModel {
 public:
  explicit NatModel(NatConfig config) : config_(std::move(config)) {}

  /// Creates or refreshes the binding for (internal -> remote) and returns
  /// the translated source address.
  Endpoint outbound(const Endpoint& internal, const Endpoint& remote, Millis now);
  /// Internal destination for a datagram from `remote` to the public
  /// `external` address, or nullopt when it is filtered.
  std::optional<Endpoint> inbound(const Endpoint& external, const Endpoint& remote, Millis now);

  const NatConfig& config() const { return config_; }
  std::size_t live_bindings(Millis now) const;

 private:
  struct Binding {
    Endpoint internal;
    Endpoint external;
    std::set<std::string> contacted_addresses;
    std::set<Endpoint> contacted_endpoints;
    Millis last_used{0};
  };

  bool alive(const Binding& b, Millis now) const { return now - b.last_used <= config_.binding_ttl; }
  void purge(Millis now);

  NatConfig config_;
  /// Keyed by internal endpoint, plus the remote address under
  /// address-dependent mapping.
  std::map<std::pair<Endpoint, std::string>, Binding> bindings_;
  std::uint16_t next_port_ = 0;
};

}  // namespace webcomm::sim
