#include "webcomm/sdk/phone.hpp"

#include "webcomm/core/error.hpp"
#include "webcomm/media/codec.hpp"

#include <algorithm>

namespace webcomm::sdk {

using signaling::SessionDescriptor;
using signaling::TransportCandidate;

namespace {

std::string describe(const ApiError& e) { return std::to_string(e.status()) + " " + e.what(); }

std::string id_from_path(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

Phone::Phone(signaling::SignalingApi& signaling, adaptor::AdaptorApi& adaptor, const Clock& clock, PhoneConfig config)
    : signaling_(signaling), adaptor_(adaptor), clock_(clock), config_(std::move(config)) {}

Phone::~Phone() {
  try {
    logout();
  } catch (const std::exception&) {
  }
}

void Phone::login() {
  if (login_.state() != CallState::Idle) fail(409, "login already attempted");
  login_.transition(CallState::Registering);
  try {
    signaling_.authenticate(config_.aor, config_.secret);
  } catch (const ApiError& e) {
    login_.transition(CallState::Failed, "auth: " + describe(e));
    return;
  }
  try {
    adaptor_.authenticate(config_.app_id, std::nullopt);
  } catch (const ApiError& e) {
    login_.transition(CallState::Failed, e.status() == 503 ? std::string(kInstallHint) : "adaptor: " + describe(e));
    return;
  }
  try {
    adaptor_stream_ = adaptor_.events();
    ensure_spare_media();
  } catch (const ApiError& e) {
    login_.transition(CallState::Failed, "adaptor: " + describe(e));
    return;
  }
  pump();
}

void Phone::logout() {
  for (auto& [h, c] : calls_) {
    if (!c.sm.terminal() || c.member) hangup(h);
  }
  if (contact_path_) {
    try {
      signaling_.unregister_contact(*contact_path_);
    } catch (const ApiError&) {
    }
    contact_path_.reset();
  }
  login_stream_.reset();
  for (auto* m : {&ready_, &spare_}) {
    if (*m) close_media(**m);
    m->reset();
  }
  adaptor_stream_.reset();
  if (!login_.terminal() && login_.state() != CallState::Idle) login_.transition(CallState::Ended, "logout");
}

// --- media sets ----------------------------------------------------------------

Phone::MediaSet Phone::make_media_set() {
  MediaSet m;
  m.rtp = adaptor_.create_object("RtpTransport", {{"port", 0}}).at("id").get<std::string>();
  try {
    m.ice = adaptor_.create_object("IceTransport", {{"components", {m.rtp}}}).at("id").get<std::string>();
    const auto state = adaptor_.invoke(m.ice, "gather", json::object());
    if (state.value("phase", std::string()) == "gathered") {
      m.candidates = signaling::parse_candidates(state.at("local_candidates"));
      m.gathered = true;
    }
  } catch (const ApiError&) {
    close_media(m);
    throw;
  }
  return m;
}

void Phone::close_media(MediaSet& m) {
  for (const auto* id : {&m.mic, &m.speaker, m.ice.empty() ? &m.rtp : &m.ice}) {
    if (id->empty()) continue;
    try {
      adaptor_.close_object(*id);
    } catch (const ApiError&) {
    }
  }
  m = MediaSet{};
}

void Phone::ensure_spare_media() {
  if (ready_ || spare_) return;
  spare_ = make_media_set();
  if (spare_->gathered) on_media_set_gathered(*spare_, json::object());
}

void Phone::on_media_set_gathered(MediaSet& m, const json& payload) {
  if (payload.contains("local_candidates")) m.candidates = signaling::parse_candidates(payload["local_candidates"]);
  m.gathered = true;
  ready_ = std::move(spare_);
  spare_.reset();
  const json body = {{"candidates", ready_->candidates}, {"presence", {{"status", "online"}}}};
  try {
    if (login_.state() == CallState::Registering) {
      const auto reg = signaling_.register_contact(config_.aor, body);
      contact_path_ = reg.at("contact_path").get<std::string>();
      registered_ = ready_->candidates;
      login_stream_ = signaling_.subscribe("/login/" + config_.aor);
      login_.transition(CallState::Online);
    } else if (contact_path_) {
      signaling_.update_contact(*contact_path_, body);
      registered_ = ready_->candidates;
    }
  } catch (const ApiError& e) {
    if (!login_.terminal()) login_.transition(CallState::Failed, "register: " + describe(e));
  }
}

SessionDescriptor Phone::local_session(const MediaSet& m) const {
  SessionDescriptor s;
  s.candidates = m.candidates;
  s.codecs_supported = config_.codecs_supported;
  s.codecs_preferred = config_.codecs_preferred;
  return s;
}

// --- call control ----------------------------------------------------------------

Phone::Handle Phone::place_call(const std::string& callee) {
  if (!online()) fail(409, "not online");
  if (!ready_) fail(409, "media not ready");
  const Handle h = "k" + std::to_string(next_handle_++);
  auto& call = calls_[h];
  call.handle = h;
  call.outgoing = true;
  call.sm.peer = callee;
  try {
    signaling_.get_login(callee);
  } catch (const ApiError& e) {
    set_state(call, CallState::Failed, e.status() == 404 ? "offline" : "signaling: " + describe(e));
    return h;
  }
  set_state(call, CallState::Inviting);
  try {
    call.call_id = signaling_.create_call().at("call_id").get<std::string>();
    call.sm.call_path = "/call/" + call.call_id;
    call.media = std::move(ready_);
    ready_.reset();
    ensure_spare_media();
    call.sm.session_local = local_session(*call.media);
    call.participant_id =
        signaling_.join_call(call.call_id, json(*call.sm.session_local)).at("participant_id").get<std::string>();
    call.member = true;
    call.conference = signaling_.subscribe(*call.sm.call_path);
    signaling_.notify("/login/" + callee, {{"type", "invitation"},
                                           {"conference", *call.sm.call_path},
                                           {"time", to_seconds(clock_.now())},
                                           {"return", "/login/" + config_.aor}});
  } catch (const ApiError& e) {
    finish(call, CallState::Failed, "signaling: " + describe(e), true);
    return h;
  }
  pump();
  return h;
}

void Phone::accept(const Handle& h) {
  pump();
  auto& call = get(h);
  if (call.sm.state() != CallState::Invited) return;
  if (!ready_) {
    finish(call, CallState::Failed, "media not ready", false);
    return;
  }
  set_state(call, CallState::Joining);
  call.media = std::move(ready_);
  ready_.reset();
  try {
    ensure_spare_media();
  } catch (const ApiError&) {
  }
  call.sm.session_local = local_session(*call.media);
  try {
    call.participant_id =
        signaling_.join_call(call.call_id, json(*call.sm.session_local)).at("participant_id").get<std::string>();
    call.member = true;
  } catch (const ApiError& e) {
    finish(call, e.status() == 404 ? CallState::Ended : CallState::Failed,
           e.status() == 404 ? "cancelled" : "signaling: " + describe(e), false);
    return;
  }
  try {
    call.conference = signaling_.subscribe(*call.sm.call_path);
  } catch (const ApiError& e) {
    finish(call, CallState::Failed, "signaling: " + describe(e), true);
    return;
  }
  pump();
}

void Phone::reject(const Handle& h) {
  auto& call = get(h);
  if (call.sm.state() != CallState::Invited) return;
  try {
    signaling_.notify(call.return_path,
                      {{"type", "cancellation"}, {"conference", *call.sm.call_path}, {"reason", "rejected"}});
  } catch (const ApiError&) {
  }
  finish(call, CallState::Ended, "rejected", false);
}

void Phone::hangup(const Handle& h) {
  auto& call = get(h);
  if (call.sm.terminal()) {
    leave(call);
    return;
  }
  switch (call.sm.state()) {
    case CallState::Invited: reject(h); return;
    case CallState::Inviting:
      try {
        signaling_.notify("/login/" + *call.sm.peer,
                          {{"type", "cancellation"}, {"conference", *call.sm.call_path}, {"reason", "cancelled"}});
      } catch (const ApiError&) {
      }
      [[fallthrough]];
    default: finish(call, CallState::Ended, "hangup", true);
  }
}

void Phone::send_chat(const Handle& h, const std::string& text) {
  auto& call = get(h);
  if (!call.member) fail(409, "not a conference member");
  signaling_.notify(*call.sm.call_path, {{"type", "chat"}, {"text", text}});
}

// --- events ----------------------------------------------------------------------

std::size_t Phone::pump() {
  std::size_t handled = 0;
  for (int round = 0; round < 64; ++round) {
    std::size_t n = 0;
    if (adaptor_stream_) {
      for (const auto& f : adaptor_stream_->queue().drain()) {
        on_adaptor_event(f);
        ++n;
      }
    }
    if (login_stream_) {
      for (const auto& f : login_stream_->queue().drain()) {
        on_login_event(f);
        ++n;
      }
    }
    std::vector<Handle> handles;
    for (const auto& [h, c] : calls_) handles.push_back(h);
    for (const auto& h : handles) {
      auto& call = calls_.at(h);
      if (!call.conference) continue;
      for (const auto& f : call.conference->queue().drain()) {
        on_conference_event(call, f);
        ++n;
        if (!call.conference) break;
      }
    }
    handled += n;
    if (n == 0) break;
  }
  return handled;
}

void Phone::on_adaptor_event(const json& frame) {
  if (frame.value("type", std::string()) != "ice-phase") return;
  const auto& payload = frame.at("payload");
  const auto object = payload.value("object", std::string());
  const auto phase = payload.value("phase", std::string());
  if (spare_ && spare_->ice == object) {
    if (phase == "gathered" && !spare_->gathered) on_media_set_gathered(*spare_, payload);
    return;
  }
  for (auto& [h, call] : calls_) {
    if (!call.media || call.media->ice != object || call.sm.terminal()) continue;
    if (phase == "connected" && call.sm.state() == CallState::Joining) {
      try {
        start_pipelines(call);
        set_state(call, CallState::InCall);
      } catch (const ApiError& e) {
        finish(call, CallState::Failed, "media: " + describe(e), false);
      }
    } else if (phase == "failed") {
      finish(call, CallState::Failed, "no-path", false);
    }
    return;
  }
}

void Phone::on_login_event(const json& frame) {
  const auto type = frame.value("type", std::string());
  if (!frame.contains("payload")) return;
  const auto& payload = frame["payload"];
  if (type == "invitation") {
    on_invitation(payload);
  } else if (type == "cancellation") {
    on_cancellation(payload);
  }
}

void Phone::on_invitation(const json& p) {
  if (!config_.receive_calls) return;
  const auto conference = p.value("conference", std::string());
  const auto from = p.value("from", std::string());
  const auto ret = p.value("return", "/login/" + from);
  if (conference.empty() || by_conference(conference)) return;
  const auto incoming_id = id_from_path(conference);
  bool glare = false;
  for (auto& [h, c] : calls_) {
    if (!c.outgoing || c.sm.state() != CallState::Inviting || c.sm.peer != from) continue;
    if (c.call_id < incoming_id) return;
    try {
      signaling_.notify("/login/" + from,
                        {{"type", "cancellation"}, {"conference", *c.sm.call_path}, {"reason", "glare"}});
    } catch (const ApiError&) {
    }
    finish(c, CallState::Ended, "glare", true);
    glare = true;
    break;
  }
  if (busy()) {
    try {
      signaling_.notify(ret, {{"type", "cancellation"}, {"conference", conference}, {"reason", "busy"}});
    } catch (const ApiError&) {
    }
    return;
  }
  const Handle h = "k" + std::to_string(next_handle_++);
  auto& call = calls_[h];
  call.handle = h;
  call.call_id = incoming_id;
  call.return_path = ret;
  call.sm.peer = from;
  call.sm.call_path = conference;
  set_state(call, CallState::Invited);
  if (glare) accept(h);
}

void Phone::on_cancellation(const json& p) {
  auto* call = by_conference(p.value("conference", std::string()));
  if (!call || call->sm.terminal()) return;
  const auto reason = p.value("reason", std::string("cancelled"));
  if (call->sm.state() == CallState::Invited) {
    finish(*call, CallState::Ended, "cancelled", false);
    return;
  }
  finish(*call, is_ended_reason(reason) ? CallState::Ended : CallState::Failed, reason, true);
}

void Phone::on_conference_event(Call& call, const json& frame) {
  const auto type = frame.value("type", std::string());
  if (!frame.contains("payload")) return;
  const auto& payload = frame["payload"];
  if (type == "chat") {
    call.chat.push_back(payload);
    return;
  }
  if (type != "membership-change" || (call.sm.terminal() && !call.member)) return;
  const auto& participants = payload.at("participants");
  const json* remote = nullptr;
  for (const auto& entry : participants) {
    const auto pid = entry.value("participant_id", std::string());
    if (pid != call.participant_id && (call.remote_participant.empty() || pid == call.remote_participant)) {
      remote = &entry;
      break;
    }
  }
  if (!call.remote_participant.empty() && !remote) {
    if (!call.sm.terminal()) finish(call, CallState::Ended, "remote-hangup", true);
    return;
  }
  if (!remote || !call.remote_participant.empty() || call.sm.terminal()) return;
  call.remote_participant = remote->at("participant_id").get<std::string>();
  call.sm.session_remote = signaling::parse_session(remote->at("session"));
  const auto& mine = *call.sm.session_local;
  const auto& theirs = *call.sm.session_remote;
  call.negotiated = call.participant_id < call.remote_participant ? media::negotiate_codecs(mine, theirs)
                                                                   : media::negotiate_codecs(theirs, mine);
  if (call.sm.state() == CallState::Inviting) set_state(call, CallState::Joining);
  if (call.negotiated.empty()) {
    finish(call, CallState::Failed, "no-common-codec", false);
    return;
  }
  start_media_path(call);
}

void Phone::start_media_path(Call& call) {
  const auto& remote = *call.sm.session_remote;
  try {
    if (!remote.ice) {
      const auto top = std::max_element(remote.candidates.begin(), remote.candidates.end(),
                                        [](const auto& a, const auto& b) { return a.priority < b.priority; });
      adaptor_.invoke(call.media->rtp, "set_remote", {{"remote", top->address + ":" + std::to_string(top->port)}});
      start_pipelines(call);
      set_state(call, CallState::InCall);
      return;
    }
    adaptor_.invoke(call.media->ice, "run", {{"candidates", remote.candidates}});
  } catch (const ApiError& e) {
    finish(call, CallState::Failed, "no-path: " + describe(e), false);
  }
}

void Phone::start_pipelines(Call& call) {
  auto& m = *call.media;
  std::string codec = "tone";
  for (const auto& name : call.negotiated) {
    const auto c = media::CodecRegistry::defaults().by_name(name);
    if (c && c->kind == media::MediaKind::Audio) {
      codec = name;
      break;
    }
  }
  m.mic = adaptor_.create_object("Microphone", {{"frequency", config_.tone_hz}, {"codec", codec}}).at("id");
  m.speaker = adaptor_.create_object("Speaker", json::object()).at("id");
  adaptor_.invoke(m.mic, "connect", {{"sink", m.rtp}});
  adaptor_.invoke(m.rtp, "connect", {{"sink", m.speaker}});
}

// --- bookkeeping -----------------------------------------------------------------

void Phone::set_state(Call& call, CallState to, const std::string& reason) {
  call.sm.transition(to, reason);
  if (listener_) listener_(call.handle, to, reason);
}

void Phone::finish(Call& call, CallState to, const std::string& reason, bool leave_conference) {
  if (call.sm.terminal()) return;
  if (leave_conference) leave(call);
  if (call.media) {
    close_media(*call.media);
    call.media.reset();
  }
  set_state(call, to, reason);
}

void Phone::leave(Call& call) {
  if (call.member) {
    try {
      signaling_.leave_call(call.call_id, call.participant_id);
    } catch (const ApiError&) {
    }
    call.member = false;
  }
  call.conference.reset();
}

Phone::Call& Phone::get(const Handle& h) {
  auto it = calls_.find(h);
  if (it == calls_.end()) fail(404, "no such call " + h);
  return it->second;
}

const Phone::Call& Phone::get(const Handle& h) const {
  auto it = calls_.find(h);
  if (it == calls_.end()) fail(404, "no such call " + h);
  return it->second;
}

Phone::Call* Phone::by_conference(const std::string& path) {
  for (auto& [h, c] : calls_) {
    if (c.sm.call_path == path) return &c;
  }
  return nullptr;
}

bool Phone::busy() const {
  return std::any_of(calls_.begin(), calls_.end(), [](const auto& kv) { return !kv.second.sm.terminal(); });
}

std::vector<Phone::Handle> Phone::calls() const {
  std::vector<Handle> out;
  for (const auto& [h, c] : calls_) out.push_back(h);
  return out;
}

const CallStateMachine& Phone::call(const Handle& h) const { return get(h).sm; }

std::optional<std::string> Phone::call_id(const Handle& h) const {
  const auto& c = get(h);
  if (c.call_id.empty()) return std::nullopt;
  return c.call_id;
}

std::optional<Phone::Handle> Phone::find_by_call_id(const std::string& call_id) const {
  for (const auto& [h, c] : calls_) {
    if (c.call_id == call_id) return h;
  }
  return std::nullopt;
}

std::optional<Phone::Handle> Phone::pending_invitation() const {
  std::optional<Handle> newest;
  std::uint64_t best = 0;
  for (const auto& [h, c] : calls_) {
    if (c.sm.state() != CallState::Invited) continue;
    const auto n = std::stoull(h.substr(1));
    if (!newest || n > best) {
      newest = h;
      best = n;
    }
  }
  return newest;
}

std::vector<std::string> Phone::negotiated(const Handle& h) const { return get(h).negotiated; }

json Phone::media_stats(const Handle& h) {
  const auto& c = get(h);
  json out = json::object();
  if (!c.media) return out;
  const std::pair<const char*, const std::string*> parts[] = {
      {"mic", &c.media->mic}, {"speaker", &c.media->speaker}, {"rtp", &c.media->rtp}, {"ice", &c.media->ice}};
  for (const auto& [name, id] : parts) {
    if (id->empty()) continue;
    try {
      out[name] = adaptor_.invoke(*id, "stats", json::object());
    } catch (const ApiError&) {
    }
  }
  return out;
}

std::vector<json> Phone::chat(const Handle& h) const { return get(h).chat; }

std::vector<std::string> Phone::media_objects(const Handle& h) const {
  const auto& c = get(h);
  std::vector<std::string> out;
  if (!c.media) return out;
  for (const auto* id : {&c.media->rtp, &c.media->ice, &c.media->mic, &c.media->speaker}) {
    if (!id->empty()) out.push_back(*id);
  }
  return out;
}

}  // namespace webcomm::sdk
