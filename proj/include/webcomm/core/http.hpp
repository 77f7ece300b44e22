#pragma once

#include "webcomm/core/event_queue.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>

namespace webcomm::http {

/// One JSON request/response exchange. Non-2xx statuses throw ApiError
/// decoded from the error body; connection failures throw ApiError(503).
nlohmann::json request(const std::string& base_url, const std::string& method, const std::string& path,
                       const nlohmann::json* body, const std::string& bearer_token);

/// GETs `path` and feeds each NDJSON line into the returned stream's queue
/// from a background thread. Throws like request() if the response status is
/// not 200. The queue is closed when the server ends the stream.
std::unique_ptr<EventStream> open_ndjson_stream(const std::string& base_url, const std::string& path,
                                                const std::string& bearer_token);

}  // namespace webcomm::http
