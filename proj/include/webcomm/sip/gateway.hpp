#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/endpoint.hpp"
#include "webcomm/core/network.hpp"
#include "webcomm/signaling/api.hpp"
#include "webcomm/sip/dialog.hpp"
#include "webcomm/sip/message.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace webcomm::sip {

using nlohmann::json;
using namespace std::chrono_literals;

struct GatewayConfig {
  Endpoint registrar;
  /// Where INVITEs for SIP users go.
  Endpoint next_hop;
  /// Address written into Via, Contact and REST contacts.
  std::string public_ip = "127.0.0.1";
  /// Socket address; empty means public_ip.
  std::string bind_address;
  std::uint16_t sip_port = 5060;
  /// Shared secret for the REST identities the gateway acts as.
  std::string secret = "webcomm";
  int register_expires = 3600;
  Millis t1 = 500ms;
  int register_attempts = 5;
  /// Seeds Call-IDs, tags and branches; 0 draws from the OS.
  std::uint64_t seed = 0;
};

/// One REST identity per address-of-record the gateway acts for.
using RestFactory = std::function<std::unique_ptr<signaling::SignalingApi>()>;

using LoginDone = std::function<void(int status, const json& result)>;

struct BridgeInfo {
  std::string sip_call_id;
  std::string call_path;
  bool outbound = false;
  std::string sip_aor;
  std::string web_aor;
  DialogState dialog = DialogState::Early;
  bool finished = false;
  std::string reason;
  int acks_sent = 0;
  int byes_sent = 0;
};

/// Translates between the REST signaling API and SIP over UDP.
///
/// login() registers a web user with the SIP registrar and, on success,
/// stores a contact for it on the REST server, so SIP peers can call it.
/// expose() makes a SIP user callable from REST: invitations to its login
/// resource become INVITEs toward the next hop. Media flows directly
/// between the adaptor and the SIP peer. All protocol work happens in
/// tick(), driven by start() or by a simulator.
class Gateway {
 public:
  Gateway(RestFactory rest, Network& network, const Clock& clock, GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// REGISTER with Expires = `expires` (config default when negative).
  /// `done` runs from tick(): 200 with the REST contact, 401 when the
  /// registrar wants credentials, 504 when it never answers, 502 otherwise.
  void login(const std::string& aor, int expires = -1, LoginDone done = {});
  std::optional<int> login_status(const std::string& aor) const;

  /// Throws ApiError when the REST server refuses.
  void expose(const std::string& sip_aor);

  void tick();
  void start(Millis period = 5ms);
  void stop();

  Endpoint local() const;
  std::vector<BridgeInfo> bridges() const;
  /// {"sent": {"INVITE": n, "200": n, ...}, "received": {...}}
  json counters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::jthread thread_;
};

}  // namespace webcomm::sip
