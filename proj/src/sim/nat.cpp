#include "webcomm/sim/nat.hpp"

#include <stdexcept>

namespace webcomm::sim {

std::string_view to_string(Mapping m) {
  return m == Mapping::EndpointIndependent ? "endpoint-independent" : "address-dependent";
}

std::string_view to_string(Filtering f) {
  switch (f) {
    case Filtering::EndpointIndependent: return "endpoint-independent";
    case Filtering::AddressDependent: return "address-dependent";
    case Filtering::AddressPortDependent: return "address-and-port-dependent";
    case Filtering::BlockAll: return "block-all";
  }
  return "unknown";
}

Mapping mapping_from_string(std::string_view s) {
  if (s == "eim" || s == "endpoint-independent") return Mapping::EndpointIndependent;
  if (s == "adm" || s == "address-dependent") return Mapping::AddressDependent;
  throw std::invalid_argument("unknown NAT mapping: " + std::string(s));
}

Filtering filtering_from_string(std::string_view s) {
  if (s == "eif" || s == "endpoint-independent") return Filtering::EndpointIndependent;
  if (s == "adf" || s == "address-dependent") return Filtering::AddressDependent;
  if (s == "apdf" || s == "address-and-port-dependent") return Filtering::AddressPortDependent;
  if (s == "block" || s == "block-all" || s == "deny-all") return Filtering::BlockAll;
  throw std::invalid_argument("unknown NAT filtering: " + std::string(s));
}

void NatModel::purge(Millis now) {
  std::erase_if(bindings_, [&](const auto& kv) { return !alive(kv.second, now); });
}

Endpoint NatModel::outbound(const Endpoint& internal, const Endpoint& remote, Millis now) {
  purge(now);
  const std::string scope = config_.mapping == Mapping::AddressDependent ? remote.address : std::string();
  auto [it, inserted] = bindings_.try_emplace({internal, scope});
  auto& b = it->second;
  if (inserted) {
    b.internal = internal;
    b.external = {config_.public_ip, static_cast<std::uint16_t>(config_.first_port + next_port_++)};
  }
  b.contacted_addresses.insert(remote.address);
  b.contacted_endpoints.insert(remote);
  b.last_used = now;
  return b.external;
}

std::optional<Endpoint> NatModel::inbound(const Endpoint& external, const Endpoint& remote, Millis now) {
  purge(now);
  const Binding* target = nullptr;
  for (const auto& [key, b] : bindings_) {
    if (b.external == external) {
      target = &b;
      break;
    }
  }
  if (!target) return std::nullopt;
  // Filtering history belongs to the internal endpoint, across all of its
  // bindings.
  bool address_seen = false;
  bool endpoint_seen = false;
  for (const auto& [key, b] : bindings_) {
    if (b.internal != target->internal) continue;
    address_seen = address_seen || b.contacted_addresses.count(remote.address) > 0;
    endpoint_seen = endpoint_seen || b.contacted_endpoints.count(remote) > 0;
  }
  switch (config_.filtering) {
    case Filtering::EndpointIndependent: return target->internal;
    case Filtering::AddressDependent: return address_seen ? std::optional(target->internal) : std::nullopt;
    case Filtering::AddressPortDependent: return endpoint_seen ? std::optional(target->internal) : std::nullopt;
    case Filtering::BlockAll: return std::nullopt;
  }
  return std::nullopt;
}

std::size_t NatModel::live_bindings(Millis now) const {
  std::size_t n = 0;
  for (const auto& [key, b] : bindings_) n += alive(b, now) ? 1 : 0;
  return n;
}

}  // namespace webcomm::sim
