#include "webcomm/core/event_queue.hpp"

namespace webcomm {

bool EventQueue::push(nlohmann::json frame) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return false;
    if (items_.size() >= capacity_) {
      closed_ = true;
      items_.push_back({{"type", "error"},
                        {"payload", {{"code", 507}, {"message", "event queue overflow"}}}});
      cv_.notify_all();
      return false;
    }
    items_.push_back(std::move(frame));
  }
  cv_.notify_one();
  return true;
}

std::optional<nlohmann::json> EventQueue::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
  if (items_.empty()) return std::nullopt;
  auto frame = std::move(items_.front());
  items_.pop_front();
  return frame;
}

std::vector<nlohmann::json> EventQueue::drain() {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> out(std::make_move_iterator(items_.begin()),
                                  std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

void EventQueue::close(std::optional<nlohmann::json> terminal) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
    if (terminal) items_.push_back(std::move(*terminal));
  }
  cv_.notify_all();
}

bool EventQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool EventQueue::finished() const {
  std::lock_guard lock(mu_);
  return closed_ && items_.empty();
}

std::size_t EventQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

}  // namespace webcomm
