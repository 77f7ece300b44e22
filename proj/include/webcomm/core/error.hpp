#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace webcomm {

/// Error carrying an HTTP-style status code. Services throw it; the HTTP
/// front-ends turn it into `{"error":{"code":..,"message":..}}`.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}

  int status() const noexcept { return status_; }

  nlohmann::json body() const {
    return {{"error", {{"code", status_}, {"message", what()}}}};
  }

  static ApiError from_body(int status, const std::string& text);

 private:
  int status_;
};

inline ApiError ApiError::from_body(int status, const std::string& text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (!parsed.is_discarded() && parsed.contains("error") && parsed["error"].is_object()) {
    const auto& e = parsed["error"];
    return ApiError(e.value("code", status), e.value("message", std::string{}));
  }
  return ApiError(status, text);
}

[[noreturn]] inline void fail(int status, const std::string& message) { throw ApiError(status, message); }

}  // namespace webcomm
