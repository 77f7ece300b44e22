#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace webcomm {

/// Bounded FIFO of event frames feeding one long-lived stream.
///
/// Producers never block. When the queue is full the stream is closed and a
/// terminal `{"type":"error"}` frame is appended past the bound, so a slow
/// consumer loses its stream rather than stalling the producer.
class EventQueue {
 public:
  static constexpr std::size_t kDefaultCapacity = 1024;

  explicit EventQueue(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

  /// Returns false if the queue was already closed or overflowed.
  bool push(nlohmann::json frame);

  /// Blocks up to `timeout`. nullopt on timeout or when closed and drained.
  std::optional<nlohmann::json> pop(std::chrono::milliseconds timeout);

  std::vector<nlohmann::json> drain();

  void close(std::optional<nlohmann::json> terminal = std::nullopt);

  bool closed() const;
  /// Closed and nothing left to read.
  bool finished() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<nlohmann::json> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

/// A live long-lived event subscription as seen by a consumer: frames land
/// in queue(); close() ends the subscription.
class EventStream {
 public:
  virtual ~EventStream() = default;
  virtual EventQueue& queue() = 0;
  virtual void close() = 0;
};

}  // namespace webcomm
