#include "webcomm/sip/gateway.hpp"

#include "webcomm/core/encoding.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/media/codec.hpp"
#include "webcomm/sip/sdp.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>

namespace webcomm::sip {
namespace {

std::string login_path(const std::string& aor) { return "/login/" + aor; }

std::string strip_login(const std::string& path) {
  const std::string prefix = "/login/";
  return path.rfind(prefix, 0) == 0 ? path.substr(prefix.size()) : path;
}

std::string end_reason_for(int status) {
  switch (status) {
    case 486:
    case 600: return "busy";
    case 603: return "rejected";
    case 487: return "cancelled";
    default: return std::to_string(status);
  }
}

int final_for_rejection(const std::string& reason) {
  if (reason == "busy") return 486;
  if (reason == "rejected") return 603;
  return 480;
}

SipMessage make_response(const SipMessage& req, int status, const std::string& to_tag) {
  auto res = SipMessage::response(status, "");
  for (const auto& via : req.headers_named("Via")) res.add_header("Via", via);
  res.add_header("From", req.header("From").value_or(""));
  auto to = req.header("To").value_or("");
  if (!to_tag.empty() && tag_param(to).empty()) to += ";tag=" + to_tag;
  res.add_header("To", to);
  res.add_header("Call-ID", req.call_id());
  res.add_header("CSeq", req.header("CSeq").value_or(""));
  return res;
}

}  // namespace

struct Gateway::Impl {
  enum class Phase { Calling, Ringing, Answered, Confirmed, Finished };

  struct Identity {
    std::unique_ptr<signaling::SignalingApi> api;
    std::unique_ptr<EventStream> login;
    std::optional<std::string> contact_path;
  };

  struct Registration {
    std::string aor;
    SipMessage request;
    int sends = 0;
    Millis interval{0};
    Millis next_send{0};
    Millis deadline{0};
    int expires = 0;
    LoginDone done;
  };

  struct Retransmit {
    SipMessage msg;
    Endpoint to;
    Millis interval{0};
    Millis next{0};
    Millis deadline{0};
  };

  struct Bridge {
    std::string sip_call_id;
    bool outbound = false;
    std::string sip_aor;
    std::string web_aor;
    std::string call_path;
    std::string participant_id;
    std::unique_ptr<EventStream> conference;
    std::unique_ptr<Dialog> dialog;
    Endpoint peer;
    Phase phase = Phase::Calling;
    std::string reason;
    bool web_seen = false;
    bool cancelled = false;
    signaling::SessionDescriptor web_session;

    // Outbound INVITE client transaction.
    SipMessage invite;
    std::uint32_t invite_cseq = 0;
    bool provisional = false;
    bool final = false;
    std::optional<Retransmit> invite_retx;

    // Inbound INVITE server transaction.
    SipMessage remote_invite;
    std::optional<SipMessage> last_response;
    std::optional<Retransmit> ok_retx;

    std::optional<Retransmit> bye_retx;
    int acks_sent = 0;
    int byes_sent = 0;
  };

  Impl(RestFactory rest, Network& network, const Clock& clock, GatewayConfig config)
      : rest_(std::move(rest)), clock_(clock), config_(std::move(config)) {
    std::uint64_t seed = config_.seed;
    if (seed == 0) seed = std::stoull(random_hex(8), nullptr, 16);
    rng_.seed(seed);
    const auto bind = config_.bind_address.empty() ? config_.public_ip : config_.bind_address;
    socket_ = network.bind_udp({bind, config_.sip_port}, [this](const Endpoint& from, Bytes data) {
      std::lock_guard lock(inbox_mu_);
      inbox_.emplace_back(from, std::string(data.begin(), data.end()));
    });
  }

  std::string token(std::size_t bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < bytes * 2; ++i) out += kHex[rng_() & 0xf];
    return out;
  }

  std::string branch() { return "z9hG4bK" + token(8); }
  std::string sent_by() const { return config_.public_ip + ":" + std::to_string(config_.sip_port); }
  std::string contact_for(const std::string& aor) const {
    const auto user = aor.substr(0, aor.find('@'));
    return "<sip:" + user + "@" + sent_by() + ">";
  }

  void send(const SipMessage& msg, const Endpoint& to) {
    const auto bytes = serialize(msg);
    socket_->send_to(to, std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    ++sent_[msg.is_request ? msg.method : std::to_string(msg.status)];
  }

  Identity& identity(const std::string& aor) {
    auto it = identities_.find(aor);
    if (it != identities_.end()) return it->second;
    Identity id;
    id.api = rest_();
    id.api->authenticate(aor, config_.secret);
    return identities_.emplace(aor, std::move(id)).first->second;
  }

  json gateway_contact(int expires) const {
    return {{"candidates", json::array({{{"kind", "udp"},
                                         {"address", config_.public_ip},
                                         {"port", config_.sip_port},
                                         {"priority", 1},
                                         {"type", "host"}}})},
            {"expires_seconds", expires},
            {"presence", {{"via", "sip-gateway"}}}};
  }

  // --- registration -------------------------------------------------------------

  void login(const std::string& aor, int expires, LoginDone done) {
    if (expires < 0) expires = config_.register_expires;
    const auto domain = aor.substr(aor.find('@') + 1);
    auto req = SipMessage::request("REGISTER", "sip:" + domain);
    req.add_header("Via", "SIP/2.0/UDP " + sent_by() + ";branch=" + branch());
    req.add_header("Max-Forwards", "70");
    req.add_header("From", "<sip:" + aor + ">;tag=" + token(4));
    req.add_header("To", "<sip:" + aor + ">");
    req.add_header("Call-ID", token(8) + "@" + config_.public_ip);
    req.add_header("CSeq", std::to_string(++register_cseq_) + " REGISTER");
    req.add_header("Contact", contact_for(aor));
    req.add_header("Expires", std::to_string(expires));
    Registration reg;
    reg.aor = aor;
    reg.request = req;
    reg.expires = expires;
    reg.done = std::move(done);
    const auto now = clock_.now();
    reg.sends = 1;
    reg.interval = config_.t1;
    reg.next_send = now + config_.t1;
    Millis budget{0};
    for (int i = 0; i < config_.register_attempts; ++i) budget += config_.t1 * (1 << i);
    reg.deadline = now + budget;
    login_status_.erase(aor);
    send(req, config_.registrar);
    registrations_[req.branch()] = std::move(reg);
  }

  void finish_registration(Registration& reg, int sip_status) {
    int status = 502;
    json result = json::object();
    if (sip_status >= 200 && sip_status < 300) {
      try {
        auto& id = identity(reg.aor);
        if (id.contact_path) {
          result = id.api->update_contact(*id.contact_path, gateway_contact(reg.expires));
        } else {
          result = id.api->register_contact(reg.aor, gateway_contact(reg.expires));
          id.contact_path = result.value("contact_path", std::string());
        }
        status = 200;
      } catch (const ApiError& e) {
        status = e.status();
        result = e.body();
      }
    } else if (sip_status == 401 || sip_status == 407) {
      status = 401;
    } else if (sip_status == 408 || sip_status == 0) {
      status = 504;
    }
    if (status != 200 && result.empty()) {
      result = ApiError(status, sip_status == 0 ? "registrar did not answer" : "registrar answered " +
                                                                                    std::to_string(sip_status))
                   .body();
    }
    login_status_[reg.aor] = status;
    if (reg.done) completions_.emplace_back([done = reg.done, status, result] { done(status, result); });
  }

  // --- REST-side helpers ----------------------------------------------------------

  void expose(const std::string& aor) {
    auto& id = identity(aor);
    if (!id.contact_path) {
      auto r = id.api->register_contact(aor, gateway_contact(config_.register_expires));
      id.contact_path = r.value("contact_path", std::string());
    }
    if (!id.login) id.login = id.api->subscribe(login_path(aor));
  }

  void leave_conference(Bridge& b) {
    if (b.participant_id.empty()) return;
    try {
      identity(b.sip_aor).api->leave_call(b.call_path, b.participant_id);
    } catch (const ApiError&) {
    }
    b.participant_id.clear();
    if (b.conference) b.conference->close();
  }

  void notify_web(Bridge& b, const std::string& type, const std::string& reason) {
    try {
      identity(b.sip_aor).api->notify(login_path(b.web_aor),
                                      {{"type", type}, {"conference", b.call_path}, {"reason", reason}});
    } catch (const ApiError&) {
    }
  }

  void finish(Bridge& b, const std::string& reason) {
    if (b.phase == Phase::Finished) return;
    b.phase = Phase::Finished;
    b.reason = reason;
    b.invite_retx.reset();
    b.ok_retx.reset();
    if (b.dialog && !b.bye_retx) b.dialog->terminate();
    leave_conference(b);
  }

  void send_bye(Bridge& b, const std::string& reason) {
    if (!b.dialog || b.dialog->state() == DialogState::Terminated || b.bye_retx) {
      finish(b, reason);
      return;
    }
    auto bye = b.dialog->make_request("BYE", b.dialog->next_cseq(), sent_by(), branch());
    send(bye, b.peer);
    ++b.byes_sent;
    const auto now = clock_.now();
    b.bye_retx = Retransmit{bye, b.peer, config_.t1, now + config_.t1, now + config_.t1 * 64};
    finish(b, reason);
  }

  void send_ack(Bridge& b, const SipMessage& response) {
    SipMessage ack;
    if (response.status >= 300) {
      // Non-2xx: part of the INVITE transaction, same branch.
      ack = SipMessage::request("ACK", b.invite.uri);
      ack.add_header("Via", b.invite.header("Via").value_or(""));
      ack.add_header("Max-Forwards", "70");
      ack.add_header("From", b.invite.header("From").value_or(""));
      ack.add_header("To", response.header("To").value_or(""));
      ack.add_header("Call-ID", b.sip_call_id);
      ack.add_header("CSeq", std::to_string(b.invite_cseq) + " ACK");
    } else {
      ack = b.dialog->make_request("ACK", b.invite_cseq, sent_by(), branch());
    }
    send(ack, b.peer);
    ++b.acks_sent;
  }

  // --- REST -> SIP ------------------------------------------------------------------

  void on_invitation(const std::string& sip_aor, const json& p) {
    const auto conference = p.value("conference", std::string());
    const auto web_aor = strip_login(p.value("return", std::string()));
    if (conference.empty() || web_aor.empty()) return;
    for (const auto& [_, b] : bridges_) {
      if (b.call_path == conference && b.sip_aor == sip_aor) return;
    }
    auto& id = identity(sip_aor);
    Bridge b;
    b.outbound = true;
    b.sip_aor = sip_aor;
    b.web_aor = web_aor;
    b.call_path = conference;
    b.peer = config_.next_hop;
    b.sip_call_id = token(8) + "@" + config_.public_ip;
    try {
      const auto call = id.api->get_call(conference);
      for (const auto& entry : call.at("participants")) {
        if (entry.value("aor", std::string()) == web_aor) {
          b.web_session = signaling::parse_session(entry.at("session"));
          b.web_seen = true;
        }
      }
    } catch (const ApiError&) {
      return;
    }
    if (!b.web_seen) return;
    SdpBlob offer;
    try {
      offer = to_sdp(b.web_session, rng_() >> 16);
    } catch (const SdpError&) {
      notify_web(b, "cancellation", "no-common-codec");
      return;
    }
    if (offer.codecs.empty()) {
      notify_web(b, "cancellation", "no-common-codec");
      return;
    }
    b.dialog = std::make_unique<Dialog>(b.sip_call_id, "sip:" + web_aor, token(4), "sip:" + sip_aor, "sip:" + sip_aor);
    b.invite_cseq = b.dialog->next_cseq();
    b.invite = b.dialog->make_request("INVITE", b.invite_cseq, sent_by(), branch());
    b.invite.add_header("Contact", contact_for(web_aor));
    b.invite.add_header("Content-Type", "application/sdp");
    b.invite.body = format_sdp(offer);
    send(b.invite, b.peer);
    const auto now = clock_.now();
    b.invite_retx = Retransmit{b.invite, b.peer, config_.t1, now + config_.t1, now + config_.t1 * 64};
    auto key = b.sip_call_id;
    bridges_.emplace(key, std::move(b));
  }

  void on_web_cancellation(const std::string& sip_aor, const json& p) {
    const auto conference = p.value("conference", std::string());
    for (auto& [_, b] : bridges_) {
      if (b.call_path != conference || b.sip_aor != sip_aor || b.phase == Phase::Finished) continue;
      if (b.outbound) {
        cancel_or_bye(b, "cancelled");
      } else if (b.phase == Phase::Ringing) {
        // The web user declined.
        const auto reason = p.value("reason", std::string("rejected"));
        auto res = make_response(b.remote_invite, final_for_rejection(reason), b.dialog->local_tag());
        b.last_response = res;
        send(res, b.peer);
        finish(b, reason);
      }
    }
  }

  void cancel_or_bye(Bridge& b, const std::string& reason) {
    if (b.outbound && !b.final) {
      if (!b.cancelled) {
        auto cancel = SipMessage::request("CANCEL", b.invite.uri);
        cancel.add_header("Via", b.invite.header("Via").value_or(""));
        cancel.add_header("Max-Forwards", "70");
        cancel.add_header("From", b.invite.header("From").value_or(""));
        cancel.add_header("To", b.invite.header("To").value_or(""));
        cancel.add_header("Call-ID", b.sip_call_id);
        cancel.add_header("CSeq", std::to_string(b.invite_cseq) + " CANCEL");
        send(cancel, b.peer);
        b.cancelled = true;
        b.invite_retx.reset();
      }
      b.reason = reason;
      leave_conference(b);
      return;
    }
    send_bye(b, reason);
  }

  void on_conference_event(Bridge& b, const json& frame) {
    if (frame.value("type", std::string()) != "membership-change" || !frame.contains("payload")) return;
    const auto& participants = frame["payload"].value("participants", json::array());
    const json* web = nullptr;
    for (const auto& entry : participants) {
      if (entry.value("participant_id", std::string()) != b.participant_id &&
          entry.value("aor", std::string()) == b.web_aor) {
        web = &entry;
      }
    }
    if (web) {
      if (!b.outbound && b.phase == Phase::Ringing) answer(b, *web);
      b.web_seen = true;
      return;
    }
    if (b.web_seen && b.phase != Phase::Finished) cancel_or_bye(b, "hangup");
  }

  // --- SIP -> REST ------------------------------------------------------------------

  void answer(Bridge& b, const json& web_entry) {
    try {
      b.web_session = signaling::parse_session(web_entry.at("session"));
      auto sdp = to_sdp(b.web_session, rng_() >> 16);
      auto ok = make_response(b.remote_invite, 200, b.dialog->local_tag());
      ok.add_header("Contact", contact_for(b.web_aor));
      ok.add_header("Content-Type", "application/sdp");
      ok.body = format_sdp(sdp);
      b.last_response = ok;
      send(ok, b.peer);
      const auto now = clock_.now();
      b.ok_retx = Retransmit{ok, b.peer, config_.t1, now + config_.t1, now + config_.t1 * 64};
      b.phase = Phase::Answered;
    } catch (const std::exception&) {
      auto res = make_response(b.remote_invite, 500, b.dialog->local_tag());
      send(res, b.peer);
      finish(b, "500");
    }
  }

  void on_invite(const SipMessage& req, const Endpoint& from) {
    auto existing = bridges_.find(req.call_id());
    if (existing != bridges_.end()) {
      // Retransmission: repeat the last response.
      if (existing->second.last_response) send(*existing->second.last_response, from);
      return;
    }
    send(make_response(req, 100, ""), from);
    const auto web_aor = aor_of(req.uri);
    const auto sip_aor = aor_of(uri_of(req.header("From").value_or("")));
    const auto local_tag = token(4);
    auto reply = [&](int status) { send(make_response(req, status, local_tag), from); };
    if (login_status(web_aor) != 200) return reply(404);
    SdpBlob offer;
    try {
      offer = parse_sdp(req.body);
    } catch (const SdpError&) {
      return reply(400);
    }
    auto session = from_sdp(offer);
    if (session.codecs_supported.empty()) return reply(488);

    Bridge b;
    b.sip_call_id = req.call_id();
    b.outbound = false;
    b.sip_aor = sip_aor;
    b.web_aor = web_aor;
    b.peer = from;
    b.remote_invite = req;
    b.dialog = std::make_unique<Dialog>(b.sip_call_id, "sip:" + web_aor, local_tag,
                                        uri_of(req.header("From").value_or("")),
                                        uri_of(req.header("Contact").value_or("")));
    b.dialog->set_remote_tag(tag_param(req.header("From").value_or("")));
    b.dialog->accept_remote_cseq(req.cseq()->first);
    try {
      expose(sip_aor);
      auto& api = *identity(sip_aor).api;
      b.call_path = api.create_call().at("call_path").get<std::string>();
      b.participant_id = api.join_call(b.call_path, json(session)).at("participant_id").get<std::string>();
      b.conference = api.subscribe(b.call_path);
      const auto delivered = api.notify(login_path(web_aor), {{"type", "invitation"},
                                                              {"conference", b.call_path},
                                                              {"time", to_seconds(clock_.now())},
                                                              {"return", login_path(sip_aor)}})
                                 .value("delivered", 0);
      if (delivered == 0) {
        leave_conference(b);
        return reply(480);
      }
    } catch (const ApiError&) {
      leave_conference(b);
      return reply(480);
    }
    auto ringing = make_response(req, 180, local_tag);
    b.last_response = ringing;
    send(ringing, from);
    b.phase = Phase::Ringing;
    bridges_.emplace(b.sip_call_id, std::move(b));
  }

  void on_request(const SipMessage& req, const Endpoint& from) {
    if (req.method == "INVITE") return on_invite(req, from);
    auto it = bridges_.find(req.call_id());
    if (req.method == "ACK") {
      if (it != bridges_.end() && it->second.phase == Phase::Answered) {
        it->second.ok_retx.reset();
        it->second.dialog->confirm("");
        it->second.phase = Phase::Confirmed;
      }
      return;
    }
    if (it == bridges_.end()) {
      send(make_response(req, req.method == "BYE" || req.method == "CANCEL" ? 481 : 501, ""), from);
      return;
    }
    auto& b = it->second;
    if (req.method == "CANCEL") {
      send(make_response(req, 200, b.dialog->local_tag()), from);
      if (!b.outbound && b.phase == Phase::Ringing) {
        auto terminated = make_response(b.remote_invite, 487, b.dialog->local_tag());
        b.last_response = terminated;
        send(terminated, from);
        notify_web(b, "cancellation", "cancelled");
        finish(b, "cancelled");
      }
      return;
    }
    if (req.method == "BYE") {
      if (!b.dialog->accept_remote_cseq(req.cseq()->first)) {
        send(make_response(req, 500, b.dialog->local_tag()), from);
        return;
      }
      send(make_response(req, 200, b.dialog->local_tag()), from);
      b.dialog->terminate();
      finish(b, "remote-hangup");
      return;
    }
    send(make_response(req, 501, b.dialog ? b.dialog->local_tag() : ""), from);
  }

  void on_response(const SipMessage& res) {
    const auto cseq = res.cseq();
    if (!cseq) return;
    if (cseq->second == "REGISTER") {
      auto it = registrations_.find(res.branch());
      if (it == registrations_.end() || res.status < 200) return;
      auto reg = std::move(it->second);
      registrations_.erase(it);
      finish_registration(reg, res.status);
      return;
    }
    auto it = bridges_.find(res.call_id());
    if (it == bridges_.end()) return;
    auto& b = it->second;
    if (cseq->second == "BYE") {
      b.bye_retx.reset();
      if (b.dialog) b.dialog->terminate();
      return;
    }
    if (cseq->second != "INVITE" || !b.outbound) return;
    if (res.status < 200) {
      b.provisional = true;
      b.invite_retx.reset();
      return;
    }
    if (res.status >= 300) {
      if (b.final) return send_ack(b, res);
      b.final = true;
      send_ack(b, res);
      if (b.dialog) b.dialog->terminate();
      const auto reason = b.cancelled ? b.reason : end_reason_for(res.status);
      if (!b.cancelled) notify_web(b, "cancellation", reason);
      finish(b, reason);
      return;
    }
    // 2xx
    if (b.final) {
      if (b.dialog->state() != DialogState::Terminated || b.bye_retx) send_ack(b, res);
      return;
    }
    b.final = true;
    b.invite_retx.reset();
    b.dialog->confirm(tag_param(res.header("To").value_or("")));
    if (auto contact = res.header("Contact")) b.dialog->set_remote_target(uri_of(*contact));
    send_ack(b, res);
    if (b.cancelled || b.phase == Phase::Finished) {
      send_bye(b, b.reason.empty() ? "cancelled" : b.reason);
      return;
    }
    signaling::SessionDescriptor session;
    try {
      session = from_sdp(parse_sdp(res.body));
    } catch (const SdpError&) {
      notify_web(b, "cancellation", "488");
      send_bye(b, "488");
      return;
    }
    if (media::negotiate_codecs(b.web_session, session).empty()) {
      notify_web(b, "cancellation", "no-common-codec");
      send_bye(b, "no-common-codec");
      return;
    }
    try {
      b.participant_id =
          identity(b.sip_aor).api->join_call(b.call_path, json(session)).at("participant_id").get<std::string>();
      b.conference = identity(b.sip_aor).api->subscribe(b.call_path);
      b.phase = Phase::Confirmed;
    } catch (const ApiError&) {
      send_bye(b, "conference-gone");
    }
  }

  void on_datagram(const Endpoint& from, const std::string& bytes) {
    SipMessage msg;
    try {
      msg = parse(bytes);
    } catch (const ParseError&) {
      ++received_["malformed"];
      return;
    }
    ++received_[msg.is_request ? msg.method : std::to_string(msg.status)];
    if (msg.is_request) {
      on_request(msg, from);
    } else {
      on_response(msg);
    }
  }

  // --- timers ---------------------------------------------------------------------

  bool due(std::optional<Retransmit>& r, Millis now, const std::function<void()>& on_timeout) {
    if (!r) return false;
    if (now >= r->deadline) {
      r.reset();
      on_timeout();
      return true;
    }
    if (now >= r->next) {
      send(r->msg, r->to);
      r->interval = std::min(r->interval * 2, Millis{4000});
      r->next = now + r->interval;
    }
    return false;
  }

  void timers(Millis now) {
    for (auto it = registrations_.begin(); it != registrations_.end();) {
      auto& reg = it->second;
      if (now >= reg.deadline) {
        auto done = std::move(reg);
        it = registrations_.erase(it);
        finish_registration(done, 0);
        continue;
      }
      if (now >= reg.next_send && reg.sends < config_.register_attempts) {
        send(reg.request, config_.registrar);
        ++reg.sends;
        reg.interval *= 2;
        reg.next_send = now + reg.interval;
      }
      ++it;
    }
    for (auto& [_, b] : bridges_) {
      due(b.invite_retx, now, [&] {
        b.final = true;
        if (b.dialog) b.dialog->terminate();
        notify_web(b, "cancellation", "408");
        finish(b, "408");
      });
      due(b.ok_retx, now, [&] { send_bye(b, "no-ack"); });
      due(b.bye_retx, now, [&] {
        if (b.dialog) b.dialog->terminate();
      });
    }
  }

  void tick() {
    std::vector<std::function<void()>> done;
    {
      std::lock_guard lock(mu_);
      std::deque<std::pair<Endpoint, std::string>> inbox;
      {
        std::lock_guard ilock(inbox_mu_);
        inbox.swap(inbox_);
      }
      for (const auto& [from, bytes] : inbox) on_datagram(from, bytes);
      for (auto& [aor, id] : identities_) {
        if (!id.login) continue;
        for (const auto& frame : id.login->queue().drain()) {
          const auto type = frame.value("type", std::string());
          if (!frame.contains("payload")) continue;
          if (type == "invitation") on_invitation(aor, frame["payload"]);
          if (type == "cancellation") on_web_cancellation(aor, frame["payload"]);
        }
      }
      for (auto& [_, b] : bridges_) {
        if (!b.conference) continue;
        for (const auto& frame : b.conference->queue().drain()) on_conference_event(b, frame);
      }
      timers(clock_.now());
      done.swap(completions_);
    }
    for (auto& f : done) f();
  }

  std::optional<int> login_status(const std::string& aor) const {
    auto it = login_status_.find(aor);
    if (it == login_status_.end()) return std::nullopt;
    return it->second;
  }

  RestFactory rest_;
  const Clock& clock_;
  GatewayConfig config_;
  std::mt19937_64 rng_;
  std::unique_ptr<DatagramSocket> socket_;

  mutable std::mutex mu_;
  std::map<std::string, Identity> identities_;
  std::map<std::string, Registration> registrations_;
  std::map<std::string, int> login_status_;
  std::map<std::string, Bridge> bridges_;
  std::map<std::string, std::uint64_t> sent_;
  std::map<std::string, std::uint64_t> received_;
  std::vector<std::function<void()>> completions_;
  std::uint32_t register_cseq_ = 0;

  std::mutex inbox_mu_;
  std::deque<std::pair<Endpoint, std::string>> inbox_;
};

Gateway::Gateway(RestFactory rest, Network& network, const Clock& clock, GatewayConfig config)
    : impl_(std::make_unique<Impl>(std::move(rest), network, clock, std::move(config))) {}

Gateway::~Gateway() {
  stop();
  impl_->socket_.reset();
}

void Gateway::login(const std::string& aor, int expires, LoginDone done) {
  std::lock_guard lock(impl_->mu_);
  impl_->login(aor, expires, std::move(done));
}

std::optional<int> Gateway::login_status(const std::string& aor) const {
  std::lock_guard lock(impl_->mu_);
  return impl_->login_status(aor);
}

void Gateway::expose(const std::string& sip_aor) {
  std::lock_guard lock(impl_->mu_);
  impl_->expose(sip_aor);
}

void Gateway::tick() { impl_->tick(); }

void Gateway::start(Millis period) {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this, period](std::stop_token st) {
    while (!st.stop_requested()) {
      impl_->tick();
      std::this_thread::sleep_for(period);
    }
  });
}

void Gateway::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    thread_.join();
  }
}

Endpoint Gateway::local() const { return impl_->socket_->local(); }

std::vector<BridgeInfo> Gateway::bridges() const {
  std::lock_guard lock(impl_->mu_);
  std::vector<BridgeInfo> out;
  for (const auto& [id, b] : impl_->bridges_) {
    out.push_back({id, b.call_path, b.outbound, b.sip_aor, b.web_aor,
                   b.dialog ? b.dialog->state() : DialogState::Early, b.phase == Impl::Phase::Finished, b.reason,
                   b.acks_sent, b.byes_sent});
  }
  return out;
}

json Gateway::counters() const {
  std::lock_guard lock(impl_->mu_);
  return {{"sent", impl_->sent_}, {"received", impl_->received_}};
}

}  // namespace webcomm::sip
