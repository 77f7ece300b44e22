#pragma once

#include "webcomm/sdk/phone.hpp"

#include <deque>
#include <optional>
#include <string>

namespace webcomm::sdk {

/// One-button caller bound to a single target. Never rings: incoming
/// invitations are ignored.
class ClickToCall {
 public:
  static constexpr std::size_t kHistorySize = 10;

  ClickToCall(signaling::SignalingApi& signaling, adaptor::AdaptorApi& adaptor, const Clock& clock,
              PhoneConfig config, std::string target);

  /// Starts the call, or hangs up when one is in progress.
  void click();
  void set_target(std::string target) { target_ = std::move(target); }
  const std::string& target() const { return target_; }
  void pump() { phone_.pump(); }

  /// Current state projected from the login and call state machines.
  CallState state() const;
  /// Button label for state().
  std::string label() const;
  /// Most recent target first, no repeats.
  const std::deque<std::string>& history() const { return history_; }
  Phone& phone() { return phone_; }

 private:
  Phone phone_;
  std::string target_;
  std::optional<Phone::Handle> current_;
  std::deque<std::string> history_;
};

}  // namespace webcomm::sdk
