#include "webcomm/sim/trace.hpp"

#include <algorithm>

namespace webcomm::sim {

std::size_t Trace::add(TraceEntry entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
  return entries_.size() - 1;
}

void Trace::amend(std::size_t index, const std::string& suffix) {
  std::lock_guard lock(mu_);
  if (index < entries_.size()) entries_[index].line += suffix;
}

std::vector<TraceEntry> Trace::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::vector<std::string> Trace::lines(const std::vector<std::string>& kinds) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (kinds.empty() || std::find(kinds.begin(), kinds.end(), e.kind) != kinds.end()) out.push_back(e.line);
  }
  return out;
}

void Trace::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
}

void Trace::observe(signaling::SignalingService& service) {
  service.set_observer([this](const signaling::Subscription& sub, const json& frame) {
    const std::string type = frame.value("type", "");
    std::string line = sub.owner + " <= " + type + " " + sub.resource_path + " #" +
                       std::to_string(frame.value("seq", 0));
    const auto& payload = frame.contains("payload") ? frame["payload"] : json::object();
    if (type == "membership-change") {
      line += " " + payload.value("action", "");
      const std::string pid = payload.value("participant_id", "");
      if (!pid.empty()) line += " " + pid;
    } else if (type == "contact-update") {
      line += " " + payload.value("action", "");
    } else if (payload.contains("conference") && payload["conference"].is_string()) {
      line += " " + payload["conference"].get<std::string>();
    }
    add({sub.owner, type, std::move(line)});
  });
}

std::size_t TracingSignaling::log(const std::string& kind, const std::string& line) {
  return trace_.add({who_, kind, who_ + " " + line});
}

void TracingSignaling::authenticate(const std::string& aor, const std::string& secret) {
  inner_.authenticate(aor, secret);
}

json TracingSignaling::register_contact(const std::string& aor, const json& body) {
  const auto at = log("register", "POST /login/" + aor);
  auto out = inner_.register_contact(aor, body);
  trace_.amend(at, " -> " + out.value("contact_id", ""));
  return out;
}

json TracingSignaling::update_contact(const std::string& contact_path, const json& body) {
  log("update", "PUT " + contact_path);
  return inner_.update_contact(contact_path, body);
}

void TracingSignaling::unregister_contact(const std::string& contact_path) {
  log("unregister", "DELETE " + contact_path);
  inner_.unregister_contact(contact_path);
}

json TracingSignaling::list_logins(int offset, int limit) { return inner_.list_logins(offset, limit); }

json TracingSignaling::get_login(const std::string& aor) { return inner_.get_login(aor); }

json TracingSignaling::create_call() {
  const auto at = log("create", "POST /call");
  auto out = inner_.create_call();
  trace_.amend(at, " -> " + out.value("call_id", ""));
  return out;
}

json TracingSignaling::join_call(const std::string& call_id, const json& session) {
  const auto at = log("join", "POST /call/" + signaling::call_id_from_path(call_id));
  auto out = inner_.join_call(call_id, session);
  trace_.amend(at, " -> " + out.value("participant_id", ""));
  return out;
}

void TracingSignaling::leave_call(const std::string& call_id, const std::string& participant_id) {
  log("leave", "DELETE /call/" + signaling::call_id_from_path(call_id) + "/" + participant_id);
  inner_.leave_call(call_id, participant_id);
}

json TracingSignaling::get_call(const std::string& call_id) { return inner_.get_call(call_id); }

std::unique_ptr<EventStream> TracingSignaling::subscribe(const std::string& resource_path) {
  log("subscribe", "POST " + resource_path + "?command=subscribe");
  return inner_.subscribe(resource_path);
}

json TracingSignaling::notify(const std::string& resource_path, const json& payload) {
  log("notify", "POST " + resource_path + "?command=notify " + payload.value("type", ""));
  return inner_.notify(resource_path, payload);
}

}  // namespace webcomm::sim
