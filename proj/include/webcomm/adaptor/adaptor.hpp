#pragma once

#include "webcomm/adaptor/approval.hpp"
#include "webcomm/adaptor/ice.hpp"
#include "webcomm/core/clock.hpp"
#include "webcomm/core/endpoint.hpp"
#include "webcomm/core/event_queue.hpp"
#include "webcomm/core/network.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webcomm::adaptor {

using nlohmann::json;
using namespace std::chrono_literals;

struct AdaptorConfig {
  Millis token_ttl = 24h;
  /// Permanent tokens, one JSON object per line.
  std::optional<std::filesystem::path> token_file;
  /// Address sockets bind to; also the host candidate address.
  std::string bind_address = "127.0.0.1";
  /// Address-discovery service used for reflexive candidates.
  std::optional<Endpoint> reflector;
  ice::IceTiming ice_timing;
  Millis reaper_interval = 1s;
  Millis rtcp_interval = 5s;
  std::size_t event_capacity = EventQueue::kDefaultCapacity;
  /// Seeds SSRCs and check transaction ids; 0 draws from the OS.
  std::uint64_t seed = 0;
};

struct AppGrant {
  std::string token;
  /// nullopt for permanent tokens.
  std::optional<Millis> expires_at;
};

json to_json(const AppGrant& grant);

struct ApprovalRecord {
  ApprovalRequest request;
  Decision decision;
  Millis at{0};
};

/// Host-resident service giving applications transport and media objects.
///
/// Every object lives in the scope of the token that created it. Sensitive
/// operations (connecting, binding, sending to a new peer, capturing media,
/// handing media to the client) ask the ApprovalPolicy once per app, kind
/// and subject. Timers, media frames, ICE checks and received datagrams are
/// processed in tick(), driven either by start() or by a simulator.
class Adaptor {
 public:
  Adaptor(Network& network, const Clock& clock, ApprovalPolicy& policy, AdaptorConfig config = {});
  ~Adaptor();

  Adaptor(const Adaptor&) = delete;
  Adaptor& operator=(const Adaptor&) = delete;

  /// A valid prior token of the same app is refreshed without asking.
  /// Throws ApiError(403) when the connection is denied.
  AppGrant authenticate(const std::string& app_id, const std::optional<std::string>& prior_token = std::nullopt);

  /// Returns the new object's state, which includes its "id".
  json create_object(const std::string& token, const std::string& cls, const json& params);
  json invoke(const std::string& token, const std::string& object_id, const std::string& method, const json& args);
  void close_object(const std::string& token, const std::string& object_id);
  /// {"objects":[state...], "pipelines":[...]} for the token's scope.
  json list_objects(const std::string& token);
  /// NDJSON-style frames for the token's objects. Throws ApiError(401).
  std::unique_ptr<EventStream> events(const std::string& token);

  void tick();
  /// Runs tick() on a background thread every `period`.
  void start(Millis period = 5ms);
  void stop();

  std::vector<ApprovalRecord> approvals() const;
  /// Datagrams handed to the network by this adaptor.
  std::uint64_t datagrams_sent() const;
  std::size_t object_count() const;
  std::size_t session_count() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace webcomm::adaptor
