#include "webcomm/core/error.hpp"
#include "webcomm/core/http.hpp"
#include "webcomm/signaling/api.hpp"

namespace webcomm::signaling {

HttpSignaling::HttpSignaling(std::string base_url) : base_url_(std::move(base_url)) {}

HttpSignaling::~HttpSignaling() = default;

json HttpSignaling::request(const std::string& method, const std::string& path, const json* body) {
  return http::request(base_url_, method, path, body, token_);
}

void HttpSignaling::authenticate(const std::string& aor, const std::string& secret) {
  const json body = {{"aor", aor}, {"secret", secret}};
  token_ = request("POST", "/auth", &body).at("token").get<std::string>();
}

json HttpSignaling::register_contact(const std::string& aor, const json& body) {
  return request("POST", "/login/" + aor, &body);
}

json HttpSignaling::update_contact(const std::string& contact_path, const json& body) {
  split_contact_path(contact_path);
  return request("PUT", contact_path, &body);
}

void HttpSignaling::unregister_contact(const std::string& contact_path) {
  split_contact_path(contact_path);
  request("DELETE", contact_path, nullptr);
}

json HttpSignaling::list_logins(int offset, int limit) {
  return request("GET", "/login?offset=" + std::to_string(offset) + "&limit=" + std::to_string(limit), nullptr);
}

json HttpSignaling::get_login(const std::string& aor) { return request("GET", "/login/" + aor, nullptr); }

json HttpSignaling::create_call() { return request("POST", "/call", nullptr); }

json HttpSignaling::join_call(const std::string& call_id, const json& session) {
  return request("POST", "/call/" + call_id_from_path(call_id), &session);
}

void HttpSignaling::leave_call(const std::string& call_id, const std::string& participant_id) {
  request("DELETE", "/call/" + call_id_from_path(call_id) + "/" + participant_id, nullptr);
}

json HttpSignaling::get_call(const std::string& call_id) {
  return request("GET", "/call/" + call_id_from_path(call_id), nullptr);
}

std::unique_ptr<EventStream> HttpSignaling::subscribe(const std::string& resource_path) {
  return http::open_ndjson_stream(base_url_, resource_path + "?command=subscribe", token_);
}

json HttpSignaling::notify(const std::string& resource_path, const json& payload) {
  return request("POST", resource_path + "?command=notify", &payload);
}

}  // namespace webcomm::signaling
