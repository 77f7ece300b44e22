#include "webcomm/sdk/click_to_call.hpp"

#include <algorithm>

namespace webcomm::sdk {

namespace {

PhoneConfig one_shot(PhoneConfig config) {
  config.receive_calls = false;
  return config;
}

}  // namespace

ClickToCall::ClickToCall(signaling::SignalingApi& signaling, adaptor::AdaptorApi& adaptor, const Clock& clock,
                         PhoneConfig config, std::string target)
    : phone_(signaling, adaptor, clock, one_shot(std::move(config))), target_(std::move(target)) {}

void ClickToCall::click() {
  if (current_ && !phone_.call(*current_).terminal()) {
    phone_.hangup(*current_);
    return;
  }
  if (phone_.login_state().state() == CallState::Idle) phone_.login();
  phone_.pump();
  if (!phone_.online()) return;
  current_ = phone_.place_call(target_);
  std::erase(history_, target_);
  history_.push_front(target_);
  if (history_.size() > kHistorySize) history_.pop_back();
}

CallState ClickToCall::state() const {
  if (current_) return phone_.call(*current_).state();
  return phone_.login_state().state();
}

std::string ClickToCall::label() const {
  const auto s = state();
  switch (s) {
    case CallState::Idle: return "Call " + target_;
    case CallState::Registering: return "Connecting...";
    case CallState::Online: return "Call " + target_;
    case CallState::Inviting: return "Ringing... (click to cancel)";
    case CallState::Joining: return "Connecting media...";
    case CallState::InCall: return "Hang up";
    case CallState::Invited: return "Call " + target_;
    case CallState::Ended: return "Call ended (" + std::string(current_ ? phone_.call(*current_).reason() : "") + ")";
    case CallState::Failed: {
      const auto& reason = current_ ? phone_.call(*current_).reason() : phone_.login_state().reason();
      return "Call failed: " + reason;
    }
  }
  return "";
}

}  // namespace webcomm::sdk
