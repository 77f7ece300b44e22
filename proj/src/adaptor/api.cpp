#include "webcomm/adaptor/api.hpp"

#include "webcomm/core/http.hpp"

namespace webcomm::adaptor {

json LocalAdaptor::authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) {
  const auto grant = adaptor_.authenticate(app_id, prior_token);
  token_ = grant.token;
  return to_json(grant);
}

json LocalAdaptor::create_object(const std::string& cls, const json& params) {
  return adaptor_.create_object(token_, cls, params);
}

json LocalAdaptor::invoke(const std::string& object_id, const std::string& method, const json& args) {
  return adaptor_.invoke(token_, object_id, method, args);
}

void LocalAdaptor::close_object(const std::string& object_id) { adaptor_.close_object(token_, object_id); }

json LocalAdaptor::list_objects() { return adaptor_.list_objects(token_); }

std::unique_ptr<EventStream> LocalAdaptor::events() { return adaptor_.events(token_); }

json HttpAdaptor::authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) {
  json body = {{"app_id", app_id}};
  if (prior_token) body["token"] = *prior_token;
  auto grant = http::request(base_url_, "POST", "/auth", &body, "");
  token_ = grant.at("token").get<std::string>();
  return grant;
}

json HttpAdaptor::create_object(const std::string& cls, const json& params) {
  json body = {{"class", cls}, {"params", params}};
  return http::request(base_url_, "POST", "/objects", &body, token_);
}

json HttpAdaptor::invoke(const std::string& object_id, const std::string& method, const json& args) {
  return http::request(base_url_, "POST", "/objects/" + object_id + "/" + method, &args, token_);
}

void HttpAdaptor::close_object(const std::string& object_id) {
  http::request(base_url_, "DELETE", "/objects/" + object_id, nullptr, token_);
}

json HttpAdaptor::list_objects() { return http::request(base_url_, "GET", "/objects", nullptr, token_); }

std::unique_ptr<EventStream> HttpAdaptor::events() {
  return http::open_ndjson_stream(base_url_, "/events?token=" + token_, "");
}

}  // namespace webcomm::adaptor
