#pragma once

#include "webcomm/signaling/api.hpp"

#include <mutex>
#include <string>
#include <vector>

namespace webcomm::sim {

using signaling::json;

struct TraceEntry {
  /// Address-of-record of the client that sent or received it.
  std::string who;
  /// register, update, unregister, subscribe, create, join, leave, notify,
  /// or the event type for frames a subscription received.
  std::string kind;
  std::string line;
};

/// Ordered log of signaling traffic as seen from the clients.
class Trace {
 public:
  /// Returns the entry's index for amend().
  std::size_t add(TraceEntry entry);
  void amend(std::size_t index, const std::string& suffix);
  std::vector<TraceEntry> entries() const;
  /// Lines whose kind is in `kinds`, or all lines when `kinds` is empty.
  std::vector<std::string> lines(const std::vector<std::string>& kinds = {}) const;
  void clear();

  /// Records every frame the service hands to a subscription.
  void observe(signaling::SignalingService& service);

 private:
  mutable std::mutex mu_;
  std::vector<TraceEntry> entries_;
};

/// SignalingApi decorator logging every state-changing request and
/// subscription. Reads and authentication pass through unlogged.
class TracingSignaling final : public signaling::SignalingApi {
 public:
  TracingSignaling(signaling::SignalingApi& inner, std::string who, Trace& trace)
      : inner_(inner), who_(std::move(who)), trace_(trace) {}

  void authenticate(const std::string& aor, const std::string& secret) override;
  json register_contact(const std::string& aor, const json& body) override;
  json update_contact(const std::string& contact_path, const json& body) override;
  void unregister_contact(const std::string& contact_path) override;
  json list_logins(int offset, int limit) override;
  json get_login(const std::string& aor) override;
  json create_call() override;
  json join_call(const std::string& call_id, const json& session) override;
  void leave_call(const std::string& call_id, const std::string& participant_id) override;
  json get_call(const std::string& call_id) override;
  std::unique_ptr<EventStream> subscribe(const std::string& resource_path) override;
  json notify(const std::string& resource_path, const json& payload) override;

 private:
  std::size_t log(const std::string& kind, const std::string& line);

  signaling::SignalingApi& inner_;
  std::string who_;
  Trace& trace_;
};

}  // namespace webcomm::sim
