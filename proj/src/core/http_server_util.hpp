#pragma once

// Shared pieces of the two httplib-based front-ends. Internal header.

#include "webcomm/core/error.hpp"
#include "webcomm/core/event_queue.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>

namespace webcomm::http {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline std::string bearer_token(const httplib::Request& req) {
  const auto auth = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (auth.rfind(prefix, 0) == 0) return auth.substr(prefix.size());
  if (req.has_param("token")) return req.get_param_value("token");
  return {};
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(400, "malformed JSON body");
  return j;
}

inline int int_param(const httplib::Request& req, const char* name, int fallback) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) fail(400, std::string("bad integer parameter ") + name);
    return v;
  } catch (const std::logic_error&) {
    fail(400, std::string("bad integer parameter ") + name);
  }
}

/// Runs a handler, mapping ApiError and JSON errors onto the error body.
inline void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    send_json(res, e.status(), e.body());
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, ApiError(400, e.what()).body());
  }
}

/// Streams queue frames as NDJSON over a chunked response until the queue
/// finishes or the client goes away; `release` runs exactly once afterwards.
inline void stream_ndjson(httplib::Response& res, std::shared_ptr<EventQueue> queue,
                          std::function<void()> release) {
  res.status = 200;
  res.set_chunked_content_provider(
      "application/x-ndjson",
      [queue](std::size_t, httplib::DataSink& sink) {
        if (!sink.is_writable()) return false;
        if (auto frame = queue->pop(std::chrono::milliseconds(200))) {
          const auto line = frame->dump() + "\n";
          return sink.write(line.data(), line.size());
        }
        if (queue->finished()) sink.done();
        return true;
      },
      [release = std::move(release)](bool) { release(); });
}

/// A thread pool large enough that held-open streams do not starve requests.
inline void use_wide_pool(httplib::Server& svr, std::size_t threads = 64) {
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
}

}  // namespace webcomm::http
