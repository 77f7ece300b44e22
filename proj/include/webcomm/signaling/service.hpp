#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/event_queue.hpp"
#include "webcomm/signaling/store.hpp"
#include "webcomm/signaling/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

namespace webcomm::signaling {

/// Source of contact and call identifiers. Swappable so tests can pin ids.
class IdGenerator {
 public:
  virtual ~IdGenerator() = default;
  virtual std::string next_contact_id(const std::string& aor) = 0;
  virtual std::string next_call_id() = 0;
  /// Called while replaying the store so fresh ids never collide.
  virtual void reserve_contact_id(const std::string& /*aor*/, const std::string& /*id*/) {}
  virtual void reserve_call_id(const std::string& /*id*/) {}
};

/// "c" + per-aor counter for contacts, "c" + global counter for calls.
class SequentialIds final : public IdGenerator {
 public:
  explicit SequentialIds(int contact_start = 1, int call_start = 100)
      : contact_start_(contact_start), next_call_(call_start) {}

  std::string next_contact_id(const std::string& aor) override;
  std::string next_call_id() override;
  void reserve_contact_id(const std::string& aor, const std::string& id) override;
  void reserve_call_id(const std::string& id) override;

 private:
  int contact_start_;
  int next_call_;
  std::map<std::string, int> next_contact_;
};

struct ServiceConfig {
  Millis default_expiry{std::chrono::seconds(3600)};
  Millis min_expiry{std::chrono::seconds(60)};
  Millis max_expiry{std::chrono::seconds(86400)};
  Millis empty_call_grace{std::chrono::seconds(30)};
  int default_limit = 20;
  int max_limit = 100;
  std::string shared_secret = "webcomm";
};

struct Subscription {
  std::string sub_id;
  std::string resource_path;
  std::string owner;
  std::shared_ptr<EventQueue> queue;
  std::uint64_t next_seq = 1;
};

/// The rendezvous registry behind the REST API: login contacts, conference
/// resources and subscribe/notify fan-out.
///
/// Every method takes the authenticated caller's address-of-record (empty
/// when unauthenticated) and throws ApiError with the HTTP status to return.
/// All mutations and their event fan-out happen under one writer lock, so
/// per-resource ordering and per-subscription sequence numbers follow the
/// mutation order.
class SignalingService {
 public:
  SignalingService(const Clock& clock, std::unique_ptr<Store> store, std::unique_ptr<IdGenerator> ids,
                   ServiceConfig config = {});

  /// Exchanges (aor, shared secret) for a bearer token.
  std::string authenticate(const std::string& aor, const std::string& secret);
  /// Resolves a bearer token; empty string when unknown.
  std::string principal(const std::string& token) const;

  json register_contact(const std::string& caller, const std::string& aor, const json& body);
  json update_contact(const std::string& caller, const std::string& aor, const std::string& contact_id,
                      const json& body);
  void unregister_contact(const std::string& caller, const std::string& aor, const std::string& contact_id);
  json list_logins(int offset, int limit) const;
  json get_login(const std::string& aor) const;

  json create_call(const std::string& caller);
  json join_call(const std::string& caller, const std::string& call_id, const json& session);
  void leave_call(const std::string& caller, const std::string& call_id, const std::string& participant_id);
  json get_call(const std::string& call_id) const;
  json list_calls() const;

  std::shared_ptr<Subscription> subscribe(const std::string& caller, const std::string& resource_path);
  void unsubscribe(const std::string& sub_id);
  json notify(const std::string& caller, const std::string& resource_path, const json& payload);

  /// Drops expired contacts and conferences past their grace period.
  void reap();

  /// Canonical dump of registry state (contacts and conferences).
  json snapshot() const;

  const ServiceConfig& config() const { return config_; }

  /// Sees every frame handed to a subscription, under the service lock.
  using Observer = std::function<void(const Subscription&, const json& frame)>;
  void set_observer(Observer observer) { observer_ = std::move(observer); }

 private:
  struct LoginResource {
    std::map<std::string, ContactRecord> contacts;
  };

  void require_auth(const std::string& caller) const;
  bool online_locked(const std::string& aor) const;
  const ConferenceResource* live_call_locked(const std::string& call_id) const;
  ConferenceResource& live_call_or_404(const std::string& call_id);
  Millis clamp_expiry(const json& body) const;
  std::size_t publish_locked(const std::string& path, const std::string& type, json payload);
  void close_subscriptions_locked(const std::string& path);
  void replay(const json& record);
  json membership_payload(const ConferenceResource& conf, const std::string& action,
                          const std::string& participant_id) const;

  const Clock& clock_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<IdGenerator> ids_;
  ServiceConfig config_;

  mutable std::shared_mutex mu_;
  std::map<std::string, LoginResource> logins_;
  std::map<std::string, ConferenceResource> calls_;
  std::map<std::string, std::vector<std::shared_ptr<Subscription>>> subscriptions_;
  std::uint64_t next_sub_ = 1;

  Observer observer_;

  mutable std::mutex token_mu_;
  std::map<std::string, std::string> tokens_;
};

}  // namespace webcomm::signaling
