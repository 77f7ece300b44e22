#include "sip_support.hpp"

#include "webcomm/core/error.hpp"
#include "webcomm/signaling/api.hpp"
#include "webcomm/sim/world.hpp"
#include "webcomm/sip/gateway.hpp"
#include "webcomm/sip/sdp.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace webcomm::testing {

using nlohmann::json;

std::vector<CorpusEntry> load_sip_corpus(const std::filesystem::path& dir) {
  std::vector<CorpusEntry> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".sip") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    out.push_back({e.path().stem().string(), text.str()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

std::optional<std::string> rfc3261_start(std::string_view text) {
  // token = 1*(alphanum / "-" / "." / "!" / "%" / "*" / "_" / "+" / "`" / "'" / "~")
  static const std::string token = R"([A-Za-z0-9\-\.!%\*_\+`'~]+)";
  static const std::regex request_line("^(" + token + R"() ([^ \r\n]+) SIP/2\.0$)");
  static const std::regex status_line(R"(^SIP/2\.0 ([1-6][0-9][0-9]) ([^\r\n]*)$)");
  static const std::regex header_line("^" + token + R"([ \t]*:.*$)");
  static const std::regex continuation(R"(^[ \t]+.*$)");

  const auto head_end = text.find("\n\n") != std::string_view::npos && text.find("\r\n\r\n") == std::string_view::npos
                            ? text.find("\n\n")
                            : text.find("\r\n\r\n");
  if (head_end == std::string_view::npos) return std::nullopt;
  std::vector<std::string> lines;
  std::istringstream in{std::string(text.substr(0, head_end))};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) return std::nullopt;
  std::smatch m;
  std::string method;
  if (std::regex_match(lines[0], m, request_line)) {
    method = m[1];
  } else if (!std::regex_match(lines[0], status_line)) {
    return std::nullopt;
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const bool ok = std::regex_match(lines[i], header_line) || (i > 1 && std::regex_match(lines[i], continuation));
    if (!ok) return std::nullopt;
  }
  return method;
}

CheckResult check_sip_roundtrip(const std::vector<CorpusEntry>& corpus) {
  CheckResult result;
  for (const auto& e : corpus) {
    const auto grammar = rfc3261_start(e.text);
    if (!grammar) {
      result.fail(e.name + ": not in the RFC 3261 grammar");
      continue;
    }
    try {
      const auto first = sip::parse(e.text);
      if (first.is_request != !grammar->empty() || (first.is_request && first.method != *grammar)) {
        result.fail(e.name + ": start line disagrees with the grammar");
      }
      const auto s1 = sip::serialize(first);
      const auto second = sip::parse(s1);
      const auto s2 = sip::serialize(second);
      if (!(second == first)) result.fail(e.name + ": parse(serialize(m)) != m");
      if (s1 != s2) result.fail(e.name + ": serialize is not a fixed point");
    } catch (const std::exception& ex) {
      result.fail(e.name + ": " + ex.what());
    }
  }
  if (result.ok) result.detail = std::to_string(corpus.size()) + " messages round-trip";
  return result;
}

namespace {

std::string mutate(std::string s, std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return n == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const int rounds = 1 + static_cast<int>(pick(4));
  for (int r = 0; r < rounds; ++r) {
    switch (pick(9)) {
      case 0:
        if (!s.empty()) s[pick(s.size())] ^= static_cast<char>(1u << pick(8));
        break;
      case 1: s.insert(pick(s.size() + 1), 1, static_cast<char>(pick(256))); break;
      case 2:
        if (!s.empty()) s.erase(pick(s.size()), 1 + pick(8));
        break;
      case 3: s.resize(pick(s.size() + 1)); break;
      case 4: {
        const char specials[] = {'\r', '\n', '\0', ':', ' ', '\t', ';', '<', '>'};
        s.insert(pick(s.size() + 1), 1, specials[pick(sizeof specials)]);
        break;
      }
      case 5: {
        // Duplicate a line.
        auto a = s.find('\n', pick(s.size()));
        if (a == std::string::npos) break;
        auto b = s.find('\n', a + 1);
        if (b == std::string::npos) break;
        s.insert(a + 1, s.substr(a + 1, b - a));
        break;
      }
      case 6: {
        // Rewrite a Content-Length value.
        auto at = s.find("Content-Length: ");
        if (at == std::string::npos) break;
        auto end = s.find_first_of("\r\n", at);
        const char* values[] = {"0", "10", "999999", "-1", "4294967296", "abc", ""};
        s.replace(at + 16, end - at - 16, values[pick(std::size(values))]);
        break;
      }
      case 7: s.insert(pick(s.size() + 1), std::string(pick(3000), 'A')); break;
      case 8: {
        // Swap two lines.
        std::vector<std::string> lines;
        std::istringstream in(s);
        std::string l;
        while (std::getline(in, l)) lines.push_back(l);
        if (lines.size() < 2) break;
        std::swap(lines[pick(lines.size())], lines[pick(lines.size())]);
        std::string out;
        for (const auto& x : lines) out += x + "\n";
        s = out;
        break;
      }
    }
  }
  return s;
}

}  // namespace

CheckResult check_sip_fuzz(const std::vector<CorpusEntry>& corpus, int count, std::uint64_t seed) {
  CheckResult result;
  std::mt19937_64 rng(seed);
  int parsed = 0, rejected = 0;
  for (int i = 0; i < count && result.ok; ++i) {
    const auto& base = corpus[static_cast<std::size_t>(i) % corpus.size()].text;
    const auto input = mutate(base, rng);
    try {
      const auto msg = sip::parse(input);
      ++parsed;
      const auto s1 = sip::serialize(msg);
      const auto s2 = sip::serialize(sip::parse(s1));
      if (s1 != s2) result.fail("input " + std::to_string(i) + ": accepted message does not round-trip");
    } catch (const sip::ParseError&) {
      ++rejected;
    } catch (const std::exception& e) {
      result.fail("input " + std::to_string(i) + ": untyped exception " + e.what());
    } catch (...) {
      result.fail("input " + std::to_string(i) + ": unknown exception");
    }
  }
  if (result.ok) {
    result.detail = std::to_string(count) + " inputs, 0 crashes (" + std::to_string(parsed) + " accepted, " +
                    std::to_string(rejected) + " typed errors)";
  }
  return result;
}

// --- mock peer -------------------------------------------------------------------

MockSipPeer::MockSipPeer(Network& network, Endpoint at) : at_(std::move(at)) {
  socket_ = network.bind_udp(at_, [this](const Endpoint& from, Bytes data) {
    std::lock_guard lock(mu_);
    inbox_.emplace_back(from, std::string(data.begin(), data.end()));
  });
}

void MockSipPeer::send(const sip::SipMessage& msg, const Endpoint& to) {
  const auto wire = sip::serialize(msg);
  socket_->send_to(to, std::span(reinterpret_cast<const std::uint8_t*>(wire.data()), wire.size()));
}

void MockSipPeer::process() {
  std::deque<std::pair<Endpoint, std::string>> batch;
  {
    std::lock_guard lock(mu_);
    batch.swap(inbox_);
  }
  for (const auto& [from, bytes] : batch) {
    sip::SipMessage msg;
    try {
      msg = sip::parse(bytes);
    } catch (const sip::ParseError&) {
      continue;
    }
    {
      std::lock_guard lock(mu_);
      received_.push_back(msg);
    }
    if (msg.is_request) on_request(msg, from);
  }
}

namespace {

sip::SipMessage reply_to(const sip::SipMessage& req, int status, const std::string& tag) {
  auto res = sip::SipMessage::response(status, sip::reason_phrase(status));
  for (const auto& via : req.headers_named("Via")) res.add_header("Via", via);
  res.add_header("From", req.header("From").value_or(""));
  auto to = req.header("To").value_or("");
  if (!tag.empty() && sip::tag_param(to).empty()) to += ";tag=" + tag;
  res.add_header("To", to);
  res.add_header("Call-ID", req.call_id());
  res.add_header("CSeq", req.header("CSeq").value_or(""));
  return res;
}

}  // namespace

void MockSipPeer::on_request(const sip::SipMessage& req, const Endpoint& from) {
  const auto tag = "peer" + std::to_string(tag_++);
  auto final_for = [&](Answer a) -> int {
    switch (a) {
      case Answer::Ok: return 200;
      case Answer::Unauthorized: return 401;
      case Answer::Busy: return 486;
      case Answer::Decline: return 603;
      case Answer::Silent: return 0;
    }
    return 0;
  };
  if (req.method == "REGISTER") {
    const int status = final_for(register_answer);
    if (status == 0) return;
    auto res = reply_to(req, status, tag);
    if (status == 200) res.add_header("Contact", req.header("Contact").value_or("") + ";expires=" +
                                                    req.header("Expires").value_or("3600"));
    send(res, from);
  } else if (req.method == "INVITE") {
    const int status = final_for(invite_answer);
    if (status == 0) return;
    send(reply_to(req, 100, ""), from);
    auto res = reply_to(req, status, tag);
    if (status == 200) {
      sip::SdpBlob sdp;
      sdp.session_id = 77;
      sdp.version = 1;
      sdp.origin_address = at_.address;
      sdp.connection_address = at_.address;
      sdp.port = media_port;
      std::uint8_t pt = 96;
      for (const auto& name : answer_codecs) {
        auto c = media::CodecRegistry::defaults().by_name(name);
        sdp.codecs.push_back({c ? c->payload_type : pt++, name, c ? c->clock_rate : 8000});
      }
      res.add_header("Contact", "<sip:peer@" + at_.to_string() + ">");
      res.add_header("Content-Type", "application/sdp");
      res.body = sip::format_sdp(sdp);
    }
    send(res, from);
  } else if (req.method == "BYE") {
    send(reply_to(req, 200, ""), from);
  } else if (req.method == "CANCEL") {
    send(reply_to(req, 200, ""), from);
  }
}

std::vector<sip::SipMessage> MockSipPeer::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

int MockSipPeer::count(const std::string& what) const {
  std::lock_guard lock(mu_);
  return static_cast<int>(std::count_if(received_.begin(), received_.end(), [&](const auto& m) {
    return m.is_request ? m.method == what : std::to_string(m.status) == what;
  }));
}

std::optional<sip::SipMessage> MockSipPeer::last(const std::string& what) const {
  std::lock_guard lock(mu_);
  for (auto it = received_.rbegin(); it != received_.rend(); ++it) {
    if (it->is_request ? it->method == what : std::to_string(it->status) == what) return *it;
  }
  return std::nullopt;
}

std::vector<sip::SipMessage> MockSipPeer::responses() const {
  std::lock_guard lock(mu_);
  std::vector<sip::SipMessage> out;
  for (const auto& m : received_) {
    if (!m.is_request) out.push_back(m);
  }
  return out;
}

// --- gateway flows ---------------------------------------------------------------

namespace {

constexpr const char* kWebAor = "alice@example.net";
constexpr const char* kSipAor = "carol@sip.example.org";

/// World + gateway at 192.0.2.1 + mock registrar/peer at 192.0.2.99.
struct Rig {
  Rig() : world(config()), peer(world.network().add_host("192.0.2.99"), {"192.0.2.99", 5060}) {
    sip::GatewayConfig cfg;
    cfg.registrar = peer.address();
    cfg.next_hop = peer.address();
    cfg.public_ip = "192.0.2.1";
    cfg.seed = 3;
    auto& net = world.network().add_host("192.0.2.1");
    gateway = std::make_unique<sip::Gateway>(
        [this] { return std::make_unique<signaling::LocalSignaling>(world.service()); }, net, world.clock(), cfg);
  }
  ~Rig() { gateway.reset(); }

  static sim::WorldConfig config() {
    sim::WorldConfig c;
    c.reflector.reset();
    return c;
  }

  sdk::Phone& add_alice() {
    world.add_host("192.0.2.10");
    auto& p = world.add_phone("alice", "192.0.2.10", sdk::PhoneConfig{.aor = kWebAor});
    p.login();
    run_until([&] { return (p.online() && p.media_ready()) || p.login_state().terminal(); }, Millis{5000});
    return p;
  }

  void step() {
    world.step();
    gateway->tick();
    peer.process();
  }
  bool run_until(const std::function<bool()>& done, Millis timeout) {
    const auto end = world.clock().now() + timeout;
    while (!done()) {
      if (world.clock().now() >= end) return false;
      step();
    }
    return true;
  }
  void run_for(Millis d) {
    const auto end = world.clock().now() + d;
    while (world.clock().now() < end) step();
  }

  sim::World world;
  MockSipPeer peer;
  std::unique_ptr<sip::Gateway> gateway;
};

std::string state_of(const sdk::Phone& p, const sdk::Phone::Handle& h) {
  return std::string(sdk::to_string(p.call(h).state())) + "(" + p.call(h).reason() + ")";
}

sip::SipMessage peer_invite(const Rig& rig, const std::vector<sip::SdpCodec>& codecs) {
  auto inv = sip::SipMessage::request("INVITE", std::string("sip:") + kWebAor);
  inv.add_header("Via", "SIP/2.0/UDP 192.0.2.99:5060;branch=z9hG4bKpeerinv1");
  inv.add_header("Max-Forwards", "70");
  inv.add_header("From", "<sip:dave@sip.example.org>;tag=d1");
  inv.add_header("To", std::string("<sip:") + kWebAor + ">");
  inv.add_header("Call-ID", "incoming-1@192.0.2.99");
  inv.add_header("CSeq", "1 INVITE");
  inv.add_header("Contact", "<sip:dave@192.0.2.99:5060>");
  inv.add_header("Content-Type", "application/sdp");
  sip::SdpBlob sdp;
  sdp.session_id = 5;
  sdp.version = 1;
  sdp.origin_address = rig.peer.address().address;
  sdp.connection_address = rig.peer.address().address;
  sdp.port = 50000;
  sdp.codecs = codecs;
  inv.body = sip::format_sdp(sdp);
  return inv;
}

}  // namespace

CheckResult flow_register(MockSipPeer::Answer answer, int want_status, bool want_contact) {
  CheckResult r;
  Rig rig;
  rig.peer.register_answer = answer;
  std::optional<int> status;
  rig.gateway->login(kWebAor, 3600, [&](int s, const json&) { status = s; });
  rig.run_until([&] { return status.has_value(); }, Millis{20000});
  if (!status) return r.fail("no REST outcome"), r;
  if (*status != want_status) r.fail("REST status " + std::to_string(*status) + ", want " + std::to_string(want_status));
  const auto reg = rig.peer.last("REGISTER");
  if (!reg || reg->header("Expires") != "3600") r.fail("REGISTER without Expires: 3600");
  bool stored = false;
  try {
    const auto login = rig.world.service().get_login(kWebAor);
    for (const auto& c : login.at("contacts")) {
      const auto& cand = c.at("candidates").at(0);
      stored = stored || (cand.at("address") == "192.0.2.1" && cand.at("port") == 5060);
    }
  } catch (const ApiError&) {
  }
  if (stored != want_contact) r.fail(want_contact ? "REST contact not stored" : "REST contact stored on failure");
  if (r.ok) r.detail = "REST " + std::to_string(*status);
  return r;
}

CheckResult flow_register_timeout() {
  CheckResult r;
  Rig rig;
  rig.peer.register_answer = MockSipPeer::Answer::Silent;
  std::optional<int> status;
  Millis at{0};
  const auto start = rig.world.clock().now();
  rig.gateway->login(kWebAor, 3600, [&](int s, const json&) {
    status = s;
    at = rig.world.clock().now() - start;
  });
  rig.run_until([&] { return status.has_value(); }, Millis{30000});
  if (!status) return r.fail("no REST outcome"), r;
  if (*status != 504) r.fail("REST status " + std::to_string(*status) + ", want 504");
  const double secs = to_seconds(at);
  if (secs < 15.5 || secs > 15.5 + 0.05) r.fail("504 after " + std::to_string(secs) + " s, want 15.5 s");
  if (rig.peer.count("REGISTER") != 5) r.fail(std::to_string(rig.peer.count("REGISTER")) + " REGISTER sends, want 5");
  if (r.ok) {
    std::ostringstream s;
    s << "REST 504 after " << secs << " s, 5 REGISTER sends";
    r.detail = s.str();
  }
  return r;
}

CheckResult flow_invite_busy() {
  CheckResult r;
  Rig rig;
  rig.peer.invite_answer = MockSipPeer::Answer::Busy;
  rig.gateway->expose(kSipAor);
  auto& alice = rig.add_alice();
  if (!alice.online()) return r.fail("alice never came online"), r;
  const auto h = alice.place_call(kSipAor);
  rig.run_until([&] { return alice.call(h).terminal(); }, Millis{10000});
  rig.run_for(Millis{1000});
  if (alice.call(h).state() != sdk::CallState::Ended || alice.call(h).reason() != "busy") {
    r.fail("caller reached " + state_of(alice, h) + ", want ended(busy)");
  }
  if (rig.peer.count("ACK") != 1) r.fail(std::to_string(rig.peer.count("ACK")) + " ACKs for the 486");
  if (r.ok) r.detail = "caller ended(busy), one ACK";
  return r;
}

CheckResult flow_invite_ok_then_hangup() {
  CheckResult r;
  Rig rig;
  rig.gateway->expose(kSipAor);
  auto& alice = rig.add_alice();
  if (!alice.online()) return r.fail("alice never came online"), r;
  const auto h = alice.place_call(kSipAor);
  rig.run_until([&] { return alice.call(h).state() == sdk::CallState::InCall || alice.call(h).terminal(); },
                Millis{10000});
  if (alice.call(h).state() != sdk::CallState::InCall) return r.fail("caller reached " + state_of(alice, h)), r;
  const auto call = rig.world.service().get_call(signaling::call_id_from_path(*alice.call_id(h)));
  if (call.at("participants").size() != 2) r.fail("conference has " + std::to_string(call["participants"].size()) + " participants");
  rig.run_for(Millis{2000});
  alice.hangup(h);
  rig.run_for(Millis{5000});
  if (rig.peer.count("ACK") != 1) r.fail(std::to_string(rig.peer.count("ACK")) + " ACKs for the 200");
  if (rig.peer.count("BYE") != 1) r.fail(std::to_string(rig.peer.count("BYE")) + " BYEs after REST hangup");
  const auto bridges = rig.gateway->bridges();
  if (bridges.size() != 1 || bridges[0].dialog != sip::DialogState::Terminated) r.fail("dialog not terminated");
  if (r.ok) r.detail = "in-call, one ACK, one BYE, dialog terminated";
  return r;
}

CheckResult flow_invite_timeout() {
  CheckResult r;
  Rig rig;
  rig.peer.invite_answer = MockSipPeer::Answer::Silent;
  rig.gateway->expose(kSipAor);
  auto& alice = rig.add_alice();
  if (!alice.online()) return r.fail("alice never came online"), r;
  const auto h = alice.place_call(kSipAor);
  rig.run_until([&] { return alice.call(h).terminal(); }, Millis{40000});
  if (alice.call(h).state() != sdk::CallState::Failed || alice.call(h).reason() != "408") {
    r.fail("caller reached " + state_of(alice, h) + ", want failed(408)");
  }
  if (r.ok) r.detail = "caller failed(408) after " + std::to_string(rig.peer.count("INVITE")) + " INVITE sends";
  return r;
}

CheckResult flow_incoming_call() {
  CheckResult r;
  Rig rig;
  std::optional<int> status;
  rig.gateway->login(kWebAor, 3600, [&](int s, const json&) { status = s; });
  auto& alice = rig.add_alice();
  rig.run_until([&] { return status.has_value(); }, Millis{5000});
  if (status != 200) return r.fail("gateway login failed"), r;
  rig.peer.send(peer_invite(rig, {{96, "pcm16", 8000}}), {"192.0.2.1", 5060});
  rig.run_until([&] { return alice.pending_invitation().has_value(); }, Millis{5000});
  const auto h = alice.pending_invitation();
  if (!h) return r.fail("web user never saw the invitation"), r;
  alice.accept(*h);
  std::optional<sip::SipMessage> ok;
  rig.run_until([&] {
    for (const auto& m : rig.peer.responses()) {
      if (m.status == 200 && m.cseq() && m.cseq()->second == "INVITE") ok = m;
    }
    return ok.has_value();
  }, Millis{5000});
  if (!ok) return r.fail("no 200 OK for the INVITE"), r;
  try {
    auto sdp = sip::parse_sdp(ok->body);
    if (sdp.codecs.empty()) r.fail("200 OK offers no codec");
  } catch (const std::exception& e) {
    r.fail(std::string("200 OK SDP: ") + e.what());
  }
  auto ack = sip::SipMessage::request("ACK", "sip:" + std::string(kWebAor));
  ack.add_header("Via", "SIP/2.0/UDP 192.0.2.99:5060;branch=z9hG4bKpeerack1");
  ack.add_header("Max-Forwards", "70");
  ack.add_header("From", "<sip:dave@sip.example.org>;tag=d1");
  ack.add_header("To", ok->header("To").value_or(""));
  ack.add_header("Call-ID", "incoming-1@192.0.2.99");
  ack.add_header("CSeq", "1 ACK");
  rig.peer.send(ack, {"192.0.2.1", 5060});
  rig.run_until([&] { return alice.call(*h).state() == sdk::CallState::InCall || alice.call(*h).terminal(); },
                Millis{5000});
  if (alice.call(*h).state() != sdk::CallState::InCall) r.fail("callee reached " + state_of(alice, *h));
  rig.run_for(Millis{1000});
  const int oks_before = static_cast<int>(rig.peer.responses().size());
  auto bye = sip::SipMessage::request("BYE", "sip:" + std::string(kWebAor));
  bye.add_header("Via", "SIP/2.0/UDP 192.0.2.99:5060;branch=z9hG4bKpeerbye1");
  bye.add_header("Max-Forwards", "70");
  bye.add_header("From", "<sip:dave@sip.example.org>;tag=d1");
  bye.add_header("To", ok->header("To").value_or(""));
  bye.add_header("Call-ID", "incoming-1@192.0.2.99");
  bye.add_header("CSeq", "2 BYE");
  rig.peer.send(bye, {"192.0.2.1", 5060});
  rig.run_until([&] { return alice.call(*h).terminal(); }, Millis{5000});
  rig.run_for(Millis{500});
  if (alice.call(*h).state() != sdk::CallState::Ended || alice.call(*h).reason() != "remote-hangup") {
    r.fail("after BYE the callee is " + state_of(alice, *h));
  }
  const auto responses = rig.peer.responses();
  const bool bye_ok = std::any_of(responses.begin() + oks_before, responses.end(), [](const auto& m) {
    return m.status == 200 && m.cseq() && m.cseq()->second == "BYE";
  });
  if (!bye_ok) r.fail("BYE not answered with 200");
  if (r.ok) r.detail = "invited, 200 with SDP, in-call, remote BYE ends it";
  return r;
}

CheckResult flow_incoming_no_common_codec() {
  CheckResult r;
  Rig rig;
  std::optional<int> status;
  rig.gateway->login(kWebAor, 3600, [&](int s, const json&) { status = s; });
  auto& alice = rig.add_alice();
  rig.run_until([&] { return status.has_value(); }, Millis{5000});
  rig.peer.send(peer_invite(rig, {{0, "PCMU", 8000}}), {"192.0.2.1", 5060});
  rig.run_for(Millis{500});
  const auto res = rig.peer.last("488");
  if (!res) r.fail("no 488 for an SDP without registry codecs");
  if (alice.pending_invitation()) r.fail("web user was invited anyway");
  if (r.ok) r.detail = "488 Not Acceptable Here";
  return r;
}

}  // namespace webcomm::testing
