#pragma once

#include "webcomm/signaling/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace webcomm::sdk {

enum class CallState { Idle, Registering, Online, Inviting, Invited, Joining, InCall, Ended, Failed };

std::string_view to_string(CallState s);

/// idle -> registering -> online; online -> inviting | invited;
/// inviting | invited -> joining -> in-call; any live state -> ended | failed.
bool is_valid_transition(CallState from, CallState to);

/// Ending reasons that count as a normal end rather than a failure.
bool is_ended_reason(std::string_view reason);

class InvalidTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CallStateMachine {
 public:
  explicit CallStateMachine(CallState initial = CallState::Idle) : state_(initial), trace_{initial} {}

  CallState state() const { return state_; }
  const std::string& reason() const { return reason_; }
  bool terminal() const { return state_ == CallState::Ended || state_ == CallState::Failed; }
  /// Every state entered, starting with the initial one.
  const std::vector<CallState>& trace() const { return trace_; }

  /// Throws InvalidTransition for an edge outside the graph, or when
  /// entering in-call without both session descriptors.
  void transition(CallState to, std::string reason = {});

  std::optional<std::string> call_path;
  std::optional<std::string> peer;
  std::optional<signaling::SessionDescriptor> session_local;
  std::optional<signaling::SessionDescriptor> session_remote;

 private:
  CallState state_;
  std::string reason_;
  std::vector<CallState> trace_;
};

}  // namespace webcomm::sdk
