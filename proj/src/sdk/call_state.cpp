#include "webcomm/sdk/call_state.hpp"

namespace webcomm::sdk {

std::string_view to_string(CallState s) {
  switch (s) {
    case CallState::Idle: return "idle";
    case CallState::Registering: return "registering";
    case CallState::Online: return "online";
    case CallState::Inviting: return "inviting";
    case CallState::Invited: return "invited";
    case CallState::Joining: return "joining";
    case CallState::InCall: return "in-call";
    case CallState::Ended: return "ended";
    case CallState::Failed: return "failed";
  }
  return "unknown";
}

bool is_valid_transition(CallState from, CallState to) {
  if (from == CallState::Ended || from == CallState::Failed) return false;
  if (to == CallState::Ended || to == CallState::Failed) return true;
  switch (from) {
    case CallState::Idle: return to == CallState::Registering;
    case CallState::Registering: return to == CallState::Online;
    case CallState::Online: return to == CallState::Inviting || to == CallState::Invited;
    case CallState::Inviting:
    case CallState::Invited: return to == CallState::Joining;
    case CallState::Joining: return to == CallState::InCall;
    default: return false;
  }
}

bool is_ended_reason(std::string_view reason) {
  return reason == "busy" || reason == "rejected" || reason == "cancelled" || reason == "hangup" ||
         reason == "remote-hangup" || reason == "glare" || reason == "logout";
}

void CallStateMachine::transition(CallState to, std::string reason) {
  if (!is_valid_transition(state_, to)) {
    throw InvalidTransition(std::string("invalid call transition ") + std::string(to_string(state_)) + " -> " +
                            std::string(to_string(to)));
  }
  if (to == CallState::InCall && (!session_local || !session_remote)) {
    throw InvalidTransition("in-call requires both session descriptors");
  }
  state_ = to;
  reason_ = std::move(reason);
  trace_.push_back(to);
}

}  // namespace webcomm::sdk
