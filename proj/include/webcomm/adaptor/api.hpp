#pragma once

#include "webcomm/adaptor/adaptor.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>

namespace webcomm::adaptor {

/// What an application sees of the adaptor. Holds the app's token once
/// authenticated.
class AdaptorApi {
 public:
  virtual ~AdaptorApi() = default;

  /// Returns {token, expires_at, permanent}. Throws ApiError(503) when no
  /// adaptor is reachable.
  virtual json authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) = 0;
  virtual json create_object(const std::string& cls, const json& params) = 0;
  virtual json invoke(const std::string& object_id, const std::string& method, const json& args) = 0;
  virtual void close_object(const std::string& object_id) = 0;
  virtual json list_objects() = 0;
  virtual std::unique_ptr<EventStream> events() = 0;

  const std::string& token() const { return token_; }

 protected:
  std::string token_;
};

class LocalAdaptor final : public AdaptorApi {
 public:
  explicit LocalAdaptor(Adaptor& adaptor) : adaptor_(adaptor) {}

  json authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) override;
  json create_object(const std::string& cls, const json& params) override;
  json invoke(const std::string& object_id, const std::string& method, const json& args) override;
  void close_object(const std::string& object_id) override;
  json list_objects() override;
  std::unique_ptr<EventStream> events() override;

 private:
  Adaptor& adaptor_;
};

class HttpAdaptor final : public AdaptorApi {
 public:
  explicit HttpAdaptor(std::string base_url = "http://127.0.0.1:9191") : base_url_(std::move(base_url)) {}

  json authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) override;
  json create_object(const std::string& cls, const json& params) override;
  json invoke(const std::string& object_id, const std::string& method, const json& args) override;
  void close_object(const std::string& object_id) override;
  json list_objects() override;
  std::unique_ptr<EventStream> events() override;

 private:
  std::string base_url_;
};

}  // namespace webcomm::adaptor
