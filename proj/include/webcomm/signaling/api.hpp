#pragma once

#include "webcomm/core/event_queue.hpp"
#include "webcomm/signaling/service.hpp"

#include <memory>
#include <string>

namespace webcomm::signaling {

/// Client view of the REST signaling API. Bodies and results are the JSON
/// documents that travel over HTTP; failures throw ApiError with the HTTP
/// status. One instance carries one authenticated identity.
class SignalingApi {
 public:
  virtual ~SignalingApi() = default;

  virtual void authenticate(const std::string& aor, const std::string& secret) = 0;
  virtual json register_contact(const std::string& aor, const json& body) = 0;
  virtual json update_contact(const std::string& contact_path, const json& body) = 0;
  virtual void unregister_contact(const std::string& contact_path) = 0;
  virtual json list_logins(int offset, int limit) = 0;
  virtual json get_login(const std::string& aor) = 0;
  virtual json create_call() = 0;
  virtual json join_call(const std::string& call_id, const json& session) = 0;
  virtual void leave_call(const std::string& call_id, const std::string& participant_id) = 0;
  virtual json get_call(const std::string& call_id) = 0;
  virtual std::unique_ptr<EventStream> subscribe(const std::string& resource_path) = 0;
  virtual json notify(const std::string& resource_path, const json& payload) = 0;
};

/// Splits "/login/{aor}/{cid}" into (aor, cid); throws ApiError(400).
std::pair<std::string, std::string> split_contact_path(const std::string& contact_path);
/// "/call/c123" -> "c123", passes bare ids through.
std::string call_id_from_path(const std::string& path);

/// In-process binding straight onto a SignalingService.
class LocalSignaling final : public SignalingApi {
 public:
  explicit LocalSignaling(SignalingService& service) : service_(service) {}

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
  std::string caller() const { return service_.principal(token_); }

  SignalingService& service_;
  std::string token_;
};

/// HTTP/1.1 client against a SignalingHttpServer. Each subscription gets
/// its own connection and reader thread.
class HttpSignaling final : public SignalingApi {
 public:
  explicit HttpSignaling(std::string base_url);
  ~HttpSignaling() override;

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
  json request(const std::string& method, const std::string& path, const json* body);

  std::string base_url_;
  std::string token_;
};

}  // namespace webcomm::signaling
