#include "webcomm/core/error.hpp"
#include "webcomm/signaling/api.hpp"

namespace webcomm::signaling {

std::pair<std::string, std::string> split_contact_path(const std::string& contact_path) {
  constexpr std::string_view prefix = "/login/";
  if (contact_path.rfind(prefix, 0) != 0) fail(400, "not a contact path: " + contact_path);
  const auto rest = contact_path.substr(prefix.size());
  const auto slash = rest.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == rest.size()) {
    fail(400, "not a contact path: " + contact_path);
  }
  return {rest.substr(0, slash), rest.substr(slash + 1)};
}

std::string call_id_from_path(const std::string& path) {
  constexpr std::string_view prefix = "/call/";
  if (path.rfind(prefix, 0) == 0) return path.substr(prefix.size());
  return path;
}

namespace {

class LocalStream final : public EventStream {
 public:
  LocalStream(SignalingService& service, std::shared_ptr<Subscription> sub)
      : service_(service), sub_(std::move(sub)) {}
  ~LocalStream() override { close(); }

  EventQueue& queue() override { return *sub_->queue; }
  void close() override {
    if (!closed_) service_.unsubscribe(sub_->sub_id);
    closed_ = true;
  }

 private:
  SignalingService& service_;
  std::shared_ptr<Subscription> sub_;
  bool closed_ = false;
};

}  // namespace

void LocalSignaling::authenticate(const std::string& aor, const std::string& secret) {
  token_ = service_.authenticate(aor, secret);
}

json LocalSignaling::register_contact(const std::string& aor, const json& body) {
  return service_.register_contact(caller(), aor, body);
}

json LocalSignaling::update_contact(const std::string& contact_path, const json& body) {
  auto [aor, cid] = split_contact_path(contact_path);
  return service_.update_contact(caller(), aor, cid, body);
}

void LocalSignaling::unregister_contact(const std::string& contact_path) {
  auto [aor, cid] = split_contact_path(contact_path);
  service_.unregister_contact(caller(), aor, cid);
}

json LocalSignaling::list_logins(int offset, int limit) { return service_.list_logins(offset, limit); }

json LocalSignaling::get_login(const std::string& aor) { return service_.get_login(aor); }

json LocalSignaling::create_call() { return service_.create_call(caller()); }

json LocalSignaling::join_call(const std::string& call_id, const json& session) {
  return service_.join_call(caller(), call_id_from_path(call_id), session);
}

void LocalSignaling::leave_call(const std::string& call_id, const std::string& participant_id) {
  service_.leave_call(caller(), call_id_from_path(call_id), participant_id);
}

json LocalSignaling::get_call(const std::string& call_id) { return service_.get_call(call_id_from_path(call_id)); }

std::unique_ptr<EventStream> LocalSignaling::subscribe(const std::string& resource_path) {
  return std::make_unique<LocalStream>(service_, service_.subscribe(caller(), resource_path));
}

json LocalSignaling::notify(const std::string& resource_path, const json& payload) {
  return service_.notify(caller(), resource_path, payload);
}

}  // namespace webcomm::signaling
