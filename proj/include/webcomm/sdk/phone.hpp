#pragma once

#include "webcomm/adaptor/api.hpp"
#include "webcomm/core/clock.hpp"
#include "webcomm/sdk/call_state.hpp"
#include "webcomm/signaling/api.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webcomm::sdk {

using nlohmann::json;

struct PhoneConfig {
  std::string aor;
  std::string secret = "webcomm";
  std::string app_id = "webcomm-phone";
  std::vector<std::string> codecs_supported{"tone", "pcm16"};
  std::vector<std::string> codecs_preferred{"tone"};
  double tone_hz = 440.0;
  /// False for one-shot callers that never ring.
  bool receive_calls = true;
};

constexpr std::string_view kInstallHint =
    "install-hint: no adaptor answered on this host; download and start `webcomm adaptor` first";

/// Softphone logic over the signaling and adaptor APIs.
///
/// Nothing blocks on the network: calls start work, and pump() folds in the
/// events that arrived since (signaling streams and the adaptor stream),
/// advancing the login and per-call state machines. Each call uses its own
/// freshly gathered RTP-over-ICE media set; a replacement set is gathered and
/// published on the contact as soon as one is taken.
class Phone {
 public:
  using Handle = std::string;
  using StateListener = std::function<void(const Handle& call, CallState state, const std::string& reason)>;

  Phone(signaling::SignalingApi& signaling, adaptor::AdaptorApi& adaptor, const Clock& clock, PhoneConfig config);
  ~Phone();

  Phone(const Phone&) = delete;
  Phone& operator=(const Phone&) = delete;

  /// idle -> registering; online once candidates are gathered and the
  /// contact is registered. Failures land in login_state().
  void login();
  /// Hangs up every call and unregisters.
  void logout();

  /// Returns a handle even when the call fails immediately (callee offline).
  /// Throws ApiError(409) when not online or media is not ready yet.
  Handle place_call(const std::string& callee);
  void accept(const Handle& call);
  void reject(const Handle& call);
  /// Idempotent.
  void hangup(const Handle& call);
  /// Chat message on the call's conference resource.
  void send_chat(const Handle& call, const std::string& text);

  /// Processes pending events; returns how many were handled.
  std::size_t pump();

  const CallStateMachine& login_state() const { return login_; }
  bool online() const { return login_.state() == CallState::Online; }
  bool media_ready() const { return ready_.has_value(); }
  const std::optional<std::string>& contact_path() const { return contact_path_; }
  /// Candidates currently published on the contact.
  const std::vector<signaling::TransportCandidate>& registered_candidates() const { return registered_; }

  std::vector<Handle> calls() const;
  const CallStateMachine& call(const Handle& h) const;
  std::optional<std::string> call_id(const Handle& h) const;
  std::optional<Handle> find_by_call_id(const std::string& call_id) const;
  /// Newest call still in invited state.
  std::optional<Handle> pending_invitation() const;
  /// Codecs agreed for the call, offerer's order.
  std::vector<std::string> negotiated(const Handle& h) const;
  /// {"mic":..,"speaker":..,"rtp":..,"ice":..} from the adaptor, or {}.
  json media_stats(const Handle& h);
  /// Chat messages received on the call, oldest first.
  std::vector<json> chat(const Handle& h) const;
  /// Adaptor object ids held by the call's media.
  std::vector<std::string> media_objects(const Handle& h) const;

  const std::string& aor() const { return config_.aor; }
  void on_state(StateListener listener) { listener_ = std::move(listener); }

 private:
  struct MediaSet {
    std::string rtp;
    std::string ice;
    std::string mic;
    std::string speaker;
    std::vector<signaling::TransportCandidate> candidates;
    bool gathered = false;
  };

  struct Call {
    Handle handle;
    std::string call_id;
    bool outgoing = false;
    CallStateMachine sm{CallState::Online};
    std::string participant_id;
    std::string remote_participant;
    std::string return_path;
    std::unique_ptr<EventStream> conference;
    std::optional<MediaSet> media;
    std::vector<std::string> negotiated;
    std::vector<json> chat;
    bool member = false;
  };

  MediaSet make_media_set();
  void close_media(MediaSet& m);
  void ensure_spare_media();
  signaling::SessionDescriptor local_session(const MediaSet& m) const;

  void on_adaptor_event(const json& frame);
  void on_login_event(const json& frame);
  void on_conference_event(Call& call, const json& frame);
  void on_invitation(const json& payload);
  void on_cancellation(const json& payload);
  void on_media_set_gathered(MediaSet& m, const json& payload);
  void start_media_path(Call& call);
  void start_pipelines(Call& call);

  void set_state(Call& call, CallState to, const std::string& reason = {});
  /// Terminal transition plus cleanup. `leave` drops conference membership.
  void finish(Call& call, CallState to, const std::string& reason, bool leave);
  void leave(Call& call);
  Call& get(const Handle& h);
  const Call& get(const Handle& h) const;
  Call* by_conference(const std::string& path);
  bool busy() const;

  signaling::SignalingApi& signaling_;
  adaptor::AdaptorApi& adaptor_;
  const Clock& clock_;
  PhoneConfig config_;
  StateListener listener_;

  CallStateMachine login_;
  std::optional<std::string> contact_path_;
  std::vector<signaling::TransportCandidate> registered_;
  std::unique_ptr<EventStream> login_stream_;
  std::unique_ptr<EventStream> adaptor_stream_;
  std::optional<MediaSet> ready_;
  std::optional<MediaSet> spare_;
  std::map<Handle, Call> calls_;
  std::uint64_t next_handle_ = 1;
};

}  // namespace webcomm::sdk
