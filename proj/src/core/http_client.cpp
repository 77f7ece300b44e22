#include "webcomm/core/error.hpp"
#include "webcomm/core/http.hpp"

#include <httplib.h>

#include <atomic>
#include <future>
#include <thread>

namespace webcomm::http {
namespace {

httplib::Headers auth_headers(const std::string& token) {
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

nlohmann::json decode(const httplib::Result& res) {
  if (!res) throw ApiError(503, "unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) throw ApiError::from_body(res->status, res->body);
  if (res->body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw ApiError(502, "malformed JSON response");
  return j;
}

class HttpStream final : public EventStream {
 public:
  HttpStream(const std::string& base_url, const std::string& path, const std::string& token)
      : client_(base_url) {
    client_.set_connection_timeout(3);
    client_.set_read_timeout(24 * 3600);
    std::promise<std::pair<int, std::string>> ready;
    auto ready_future = ready.get_future();
    reader_ = std::thread([this, path, headers = auth_headers(token), ready = std::move(ready)]() mutable {
      int status = 0;
      bool announced = false;
      std::string error_body;
      auto res = client_.Get(
          path, headers,
          [&](const httplib::Response& r) {
            status = r.status;
            if (status == 200) {
              announced = true;
              ready.set_value({200, {}});
            }
            return true;
          },
          [&](const char* data, std::size_t len) {
            if (stop_.load()) return false;
            if (status != 200) {
              error_body.append(data, len);
              return true;
            }
            buffer_.append(data, len);
            std::size_t nl;
            while ((nl = buffer_.find('\n')) != std::string::npos) {
              auto line = buffer_.substr(0, nl);
              buffer_.erase(0, nl + 1);
              if (line.empty()) continue;
              auto j = nlohmann::json::parse(line, nullptr, false);
              if (!j.is_discarded()) queue_.push(std::move(j));
            }
            return true;
          });
      if (!announced) {
        ready.set_value({status, res ? error_body : "unreachable: " + httplib::to_string(res.error())});
      }
      queue_.close();
    });
    auto [status, body] = ready_future.get();
    if (status != 200) {
      reader_.join();
      if (status == 0) throw ApiError(503, body);
      throw ApiError::from_body(status, body);
    }
  }

  ~HttpStream() override { close(); }

  EventQueue& queue() override { return queue_; }

  void close() override {
    if (stop_.exchange(true)) return;
    client_.stop();
    if (reader_.joinable()) reader_.join();
    queue_.close();
  }

 private:
  httplib::Client client_;
  EventQueue queue_;
  std::string buffer_;
  std::atomic<bool> stop_{false};
  std::thread reader_;
};

}  // namespace

nlohmann::json request(const std::string& base_url, const std::string& method, const std::string& path,
                       const nlohmann::json* body, const std::string& bearer_token) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(3);
  cli.set_read_timeout(30);
  const auto headers = auth_headers(bearer_token);
  const std::string payload = body ? body->dump() : std::string{};
  if (method == "GET") return decode(cli.Get(path, headers));
  if (method == "POST") return decode(cli.Post(path, headers, payload, "application/json"));
  if (method == "PUT") return decode(cli.Put(path, headers, payload, "application/json"));
  if (method == "DELETE") return decode(cli.Delete(path, headers));
  throw ApiError(500, "unsupported method " + method);
}

std::unique_ptr<EventStream> open_ndjson_stream(const std::string& base_url, const std::string& path,
                                                const std::string& bearer_token) {
  return std::make_unique<HttpStream>(base_url, path, bearer_token);
}

}  // namespace webcomm::http
