#include "webcomm/adaptor/adaptor.hpp"

#include "webcomm/core/encoding.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/media/codec.hpp"
#include "webcomm/media/rtp.hpp"
#include "webcomm/media/sources.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace webcomm::adaptor {

namespace {

enum class Cls { Udp, Tcp, Ice, Rtp, Microphone, Speaker, Camera, Display };

constexpr std::pair<Cls, std::string_view> kClasses[] = {
    {Cls::Udp, "UdpTransport"}, {Cls::Tcp, "TcpTransport"}, {Cls::Ice, "IceTransport"},
    {Cls::Rtp, "RtpTransport"}, {Cls::Microphone, "Microphone"}, {Cls::Speaker, "Speaker"},
    {Cls::Camera, "Camera"},    {Cls::Display, "Display"},
};

std::optional<Cls> class_from_string(std::string_view name) {
  for (const auto& [c, n] : kClasses) {
    if (n == name) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Cls cls) {
  for (const auto& [c, n] : kClasses) {
    if (c == cls) return n;
  }
  return "unknown";
}

constexpr std::size_t kRecvBuffer = 256;

struct Object {
  Object(std::string id_, Cls cls_, std::string token_) : id(std::move(id_)), cls(cls_), token(std::move(token_)) {}
  virtual ~Object() = default;
  virtual json state() const = 0;

  std::string id;
  Cls cls;
  std::string token;
  /// Composite that owns this object and closes it along with itself.
  std::string parent;
};

struct UdpObject final : Object {
  using Object::Object;

  json state() const override {
    return {{"address", local.address},   {"local_port", local.port},   {"peer_allowlist", allowlist},
            {"bytes_in", bytes_in},       {"bytes_out", bytes_out},     {"packets_in", packets_in},
            {"packets_out", packets_out}, {"ice", ice_owner},           {"rtp", rtp_owner}};
  }

  std::unique_ptr<DatagramSocket> socket;
  Endpoint local;
  std::set<std::string> allowlist;
  std::uint64_t bytes_in = 0, bytes_out = 0, packets_in = 0, packets_out = 0;
  std::deque<json> received;
  std::string ice_owner;
  std::string rtp_owner;
  bool is_rtcp = false;
};

struct TcpObject final : Object {
  using Object::Object;

  json state() const override {
    return {{"remote", remote.to_string()}, {"local", conn ? conn->local().to_string() : ""},
            {"secure", secure},            {"bytes_in", bytes_in},
            {"bytes_out", bytes_out}};
  }

  std::unique_ptr<StreamConnection> conn;
  Endpoint remote;
  bool secure = false;
  std::uint64_t bytes_in = 0, bytes_out = 0;
};

struct RtpObject final : Object {
  RtpObject(std::string id_, std::string token_, std::uint32_t ssrc, std::uint16_t seq, std::uint32_t ts)
      : Object(std::move(id_), Cls::Rtp, std::move(token_)), stream(ssrc, seq, ts) {}

  json state() const override {
    json j = {{"rtp_transport", rtp_id},   {"rtcp_transport", rtcp_id},    {"rtp_port", rtp_port},
              {"rtcp_port", rtcp_port},    {"address", address},           {"ssrc", stream.ssrc()},
              {"packets_sent", sent},      {"octets_sent", stream.octets()}, {"unsent", unsent},
              {"denied", denied},          {"packets_received", received}, {"malformed", malformed},
              {"rtcp_sent", rtcp_sent},    {"rtcp_received", rtcp_received}};
    j["remote"] = remote ? json(remote->to_string()) : json(nullptr);
    return j;
  }

  std::string rtp_id, rtcp_id;
  std::string address;
  std::uint16_t rtp_port = 0, rtcp_port = 0;
  media::RtpStream stream;
  std::optional<Endpoint> remote;
  std::uint64_t sent = 0, unsent = 0, denied = 0, received = 0, malformed = 0, rtcp_sent = 0, rtcp_received = 0;
  Millis last_report{0};
};

struct IceObject final : Object {
  using Object::Object;

  json state() const override {
    json j = agent->to_json();
    j["components"] = component_ids;
    return j;
  }

  std::vector<std::string> component_ids;
  /// UDP object backing each agent component, by index.
  std::vector<std::string> udp_ids;
  std::unique_ptr<ice::IceAgent> agent;
};

struct SourceObject final : Object {
  using Object::Object;

  json state() const override {
    json j = {{"kind", kind == media::MediaKind::Audio ? "audio" : "video"},
              {"codec", codec},
              {"running", running},
              {"frames", frames},
              {"volume", volume}};
    if (tone) j["frequency"] = tone->frequency();
    return j;
  }

  media::MediaFrame next_frame() { return tone ? tone->next() : pattern->next(); }
  Millis frame_duration() const { return tone ? tone->frame_duration() : pattern->frame_duration(); }
  std::uint32_t ticks() const { return tone ? tone->ticks_per_frame() : pattern->ticks_per_frame(); }

  media::MediaKind kind = media::MediaKind::Audio;
  std::optional<media::ToneSource> tone;
  std::optional<media::PatternSource> pattern;
  std::string codec;
  bool running = true;
  Millis next_at{0};
  std::uint64_t frames = 0;
  double volume = 1.0;
};

struct SinkObject final : Object {
  using Object::Object;

  json state() const override {
    json j = stats.to_json();
    j["kind"] = kind == media::MediaKind::Audio ? "audio" : "video";
    j["to_client"] = to_client;
    j["volume"] = volume;
    return j;
  }

  media::MediaKind kind = media::MediaKind::Audio;
  media::StatsSink stats;
  bool to_client = false;
  double volume = 1.0;
};

struct Pipeline {
  std::string id;
  std::string token;
  std::string source;
  std::string sink;
};

struct StreamSlot {
  std::uint64_t id;
  std::shared_ptr<EventQueue> queue;
  std::int64_t next_seq = 1;
};

struct Session {
  std::string token;
  std::string app_id;
  std::optional<Millis> expires_at;
  std::set<std::string> objects;
  std::map<std::pair<ApprovalKind, std::string>, bool> decisions;
  std::vector<StreamSlot> streams;
};

struct Inbound {
  std::string object_id;
  Endpoint from;
  Bytes data;
};

Endpoint parse_endpoint(const json& j, const char* field) {
  if (!j.is_object() || !j.contains(field) || !j[field].is_string()) fail(400, std::string("missing ") + field);
  auto ep = Endpoint::parse(j[field].get<std::string>());
  if (!ep) fail(400, std::string(field) + " must be ip:port");
  return *ep;
}

Bytes parse_data(const json& args) {
  if (!args.is_object() || !args.contains("data") || !args["data"].is_string()) fail(400, "missing data");
  try {
    return base64_decode(args["data"].get<std::string>());
  } catch (const std::invalid_argument&) {
    fail(400, "data must be base64");
  }
}

int port_param(const json& params) {
  if (!params.contains("port")) return 0;
  if (!params["port"].is_number_integer()) fail(400, "port must be an integer");
  const int port = params["port"].get<int>();
  if (port != 0 && (port < 1025 || port > 65535)) fail(400, "port must be 0 or 1025..65535");
  return port;
}

}  // namespace

json to_json(const AppGrant& grant) {
  json j = {{"token", grant.token}, {"permanent", !grant.expires_at.has_value()}};
  j["expires_at"] = grant.expires_at ? json(to_seconds(*grant.expires_at)) : json("permanent");
  return j;
}

struct Adaptor::Impl : std::enable_shared_from_this<Adaptor::Impl> {
  Impl(Network& n, const Clock& c, ApprovalPolicy& p, AdaptorConfig cfg)
      : network(n), clock(c), policy(p), config(std::move(cfg)) {
    std::uint64_t seed = config.seed;
    if (seed == 0) seed = std::stoull(random_hex(8), nullptr, 16);
    rng.seed(seed);
    last_reap = clock.now();
    load_tokens();
  }

  class IceIo final : public ice::IceAgent::Io {
   public:
    IceIo(Impl& impl, Session& session, IceObject& ice) : impl_(impl), session_(session), ice_(ice) {}
    bool send(std::size_t component, const Endpoint& to, std::string_view bytes) override {
      auto& udp = impl_.udp(ice_.udp_ids.at(component));
      if (!impl_.approve(session_, ApprovalKind::SendToNewPeer, to.address)) return false;
      impl_.send_udp(udp, to, std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      return true;
    }

   private:
    Impl& impl_;
    Session& session_;
    IceObject& ice_;
  };

  class Stream final : public EventStream {
   public:
    Stream(std::weak_ptr<Impl> impl, std::string token, std::uint64_t id, std::shared_ptr<EventQueue> queue)
        : impl_(std::move(impl)), token_(std::move(token)), id_(id), queue_(std::move(queue)) {}
    ~Stream() override { close(); }

    EventQueue& queue() override { return *queue_; }
    void close() override {
      if (auto impl = impl_.lock()) impl->drop_stream(token_, id_);
      queue_->close();
      impl_.reset();
    }

   private:
    std::weak_ptr<Impl> impl_;
    std::string token_;
    std::uint64_t id_;
    std::shared_ptr<EventQueue> queue_;
  };

  // --- tokens and approvals -------------------------------------------------

  void load_tokens() {
    if (!config.token_file) return;
    std::ifstream in(*config.token_file);
    std::string line;
    while (std::getline(in, line)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("token") || !j.contains("app_id")) continue;
      Session s;
      s.token = j["token"].get<std::string>();
      s.app_id = j["app_id"].get<std::string>();
      always.insert({s.app_id, ApprovalKind::AppConnect, ""});
      sessions.emplace(s.token, std::move(s));
    }
  }

  void persist_token(const Session& s) {
    if (!config.token_file) return;
    std::ofstream out(*config.token_file, std::ios::app);
    out << json{{"token", s.token}, {"app_id", s.app_id}}.dump() << '\n';
  }

  bool expired(const Session& s, Millis now) const { return s.expires_at && now >= *s.expires_at; }

  Session& session_for(const std::string& token) {
    auto it = sessions.find(token);
    if (it == sessions.end() || expired(it->second, clock.now())) fail(401, "invalid or expired token");
    return it->second;
  }

  bool approve(Session& s, ApprovalKind kind, const std::string& subject) {
    if (always.count({s.app_id, kind, subject})) return true;
    const auto key = std::make_pair(kind, subject);
    if (auto it = s.decisions.find(key); it != s.decisions.end()) return it->second;
    const auto decision = policy.decide({kind, s.app_id, subject});
    log.push_back({{kind, s.app_id, subject}, decision, clock.now()});
    if (decision == Decision::AllowAlways) {
      always.insert({s.app_id, kind, subject});
      return true;
    }
    s.decisions[key] = decision == Decision::AllowOnce;
    return decision == Decision::AllowOnce;
  }

  AppGrant grant_of(const Session& s) const { return {s.token, s.expires_at}; }

  AppGrant authenticate(const std::string& app_id, const std::optional<std::string>& prior) {
    if (app_id.empty()) fail(400, "app_id is required");
    std::lock_guard lock(mu);
    const auto now = clock.now();
    if (prior) {
      auto it = sessions.find(*prior);
      if (it != sessions.end() && it->second.app_id == app_id && !expired(it->second, now)) {
        if (it->second.expires_at) it->second.expires_at = now + config.token_ttl;
        return grant_of(it->second);
      }
    }
    Decision decision = Decision::AllowAlways;
    if (!always.count({app_id, ApprovalKind::AppConnect, ""})) {
      decision = policy.decide({ApprovalKind::AppConnect, app_id, ""});
      log.push_back({{ApprovalKind::AppConnect, app_id, ""}, decision, now});
    }
    if (decision == Decision::Deny) fail(403, "connection denied by user");
    Session s;
    s.token = random_hex(16);
    s.app_id = app_id;
    if (decision == Decision::AllowAlways) {
      always.insert({app_id, ApprovalKind::AppConnect, ""});
      persist_token(s);
    } else {
      s.expires_at = now + config.token_ttl;
    }
    auto grant = grant_of(s);
    sessions.emplace(s.token, std::move(s));
    return grant;
  }

  // --- events ---------------------------------------------------------------

  void emit(const std::string& token, const std::string& object_id, const std::string& type, json payload) {
    auto it = sessions.find(token);
    if (it == sessions.end()) return;
    payload["object"] = object_id;
    const double ts = to_seconds(clock.now());
    auto& streams = it->second.streams;
    for (auto sit = streams.begin(); sit != streams.end();) {
      json frame = {{"seq", sit->next_seq}, {"type", type},      {"resource", "/objects/" + object_id},
                    {"timestamp", ts},      {"payload", payload}};
      if (!sit->queue->push(std::move(frame))) {
        sit = streams.erase(sit);
        continue;
      }
      ++sit->next_seq;
      ++sit;
    }
  }

  std::unique_ptr<EventStream> events(const std::string& token) {
    std::lock_guard lock(mu);
    auto& s = session_for(token);
    auto queue = std::make_shared<EventQueue>(config.event_capacity);
    const auto id = next_stream++;
    s.streams.push_back({id, queue, 1});
    return std::make_unique<Stream>(weak_from_this(), token, id, queue);
  }

  void drop_stream(const std::string& token, std::uint64_t id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(token);
    if (it == sessions.end()) return;
    std::erase_if(it->second.streams, [&](const StreamSlot& slot) { return slot.id == id; });
  }

  // --- objects --------------------------------------------------------------

  std::string new_id() { return "o" + std::to_string(next_object++); }

  Object& owned(Session& s, const std::string& id) {
    auto it = objects.find(id);
    if (it == objects.end()) fail(404, "unknown object " + id);
    if (it->second->token != s.token) fail(403, "object " + id + " belongs to another application");
    return *it->second;
  }

  UdpObject& udp(const std::string& id) { return static_cast<UdpObject&>(*objects.at(id)); }

  template <typename T>
  T& add(Session& s, std::unique_ptr<T> obj) {
    auto& ref = *obj;
    s.objects.insert(obj->id);
    objects.emplace(obj->id, std::move(obj));
    return ref;
  }

  ReceiveHandler handler_for(const std::string& id) {
    return [this, id](const Endpoint& from, Bytes data) {
      std::lock_guard lock(inbox_mu);
      inbox.push_back({id, from, std::move(data)});
    };
  }

  std::unique_ptr<UdpObject> make_udp(Session& s, int port) {
    auto obj = std::make_unique<UdpObject>(new_id(), Cls::Udp, s.token);
    obj->socket = network.bind_udp({config.bind_address, static_cast<std::uint16_t>(port)}, handler_for(obj->id));
    obj->local = obj->socket->local();
    return obj;
  }

  void require_bind(Session& s) {
    if (!approve(s, ApprovalKind::Bind, "")) fail(403, "bind denied by user");
  }

  void send_udp(UdpObject& u, const Endpoint& to, std::span<const std::uint8_t> data) {
    u.socket->send_to(to, data);
    u.allowlist.insert(to.address);
    u.bytes_out += data.size();
    ++u.packets_out;
    ++sent;
  }

  std::string create_locked(Session& s, Cls cls, const json& params) {
    switch (cls) {
      case Cls::Udp: {
        const int port = port_param(params);
        require_bind(s);
        return add(s, make_udp(s, port)).id;
      }
      case Cls::Tcp: return create_tcp(s, params);
      case Cls::Rtp: return create_rtp(s, params);
      case Cls::Ice: return create_ice(s, params);
      case Cls::Microphone:
      case Cls::Camera: return create_source(s, cls, params);
      case Cls::Speaker:
      case Cls::Display: return create_sink(s, cls, params);
    }
    fail(400, "unknown class");
  }

  std::string create_tcp(Session& s, const json& params) {
    const auto remote = parse_endpoint(params, "to");
    if (!approve(s, ApprovalKind::SendToNewPeer, remote.address)) fail(403, "connection to " + remote.address + " denied");
    auto obj = std::make_unique<TcpObject>(new_id(), Cls::Tcp, s.token);
    obj->remote = remote;
    obj->secure = params.value("secure", false);
    obj->conn = network.connect_tcp(remote, handler_for(obj->id));
    return add(s, std::move(obj)).id;
  }

  std::string create_rtp(Session& s, const json& params) {
    const int port = port_param(params);
    if (port == 65535) fail(400, "RTP port leaves no room for RTCP");
    require_bind(s);
    std::unique_ptr<UdpObject> rtp, rtcp;
    for (int attempt = 0; attempt < 64 && !rtcp; ++attempt) {
      rtp = make_udp(s, port);
      if (rtp->local.port == 65535) continue;
      try {
        rtcp = make_udp(s, rtp->local.port + 1);
      } catch (const ApiError& e) {
        if (port != 0 || e.status() != 409) throw;
      }
      if (port != 0 && !rtcp) break;
    }
    if (!rtcp) fail(409, "no adjacent port pair available");
    std::uniform_int_distribution<std::uint32_t> dist;
    auto obj = std::make_unique<RtpObject>(new_id(), s.token, dist(rng), static_cast<std::uint16_t>(dist(rng)),
                                           dist(rng));
    obj->rtp_id = rtp->id;
    obj->rtcp_id = rtcp->id;
    obj->address = rtp->local.address;
    obj->rtp_port = rtp->local.port;
    obj->rtcp_port = rtcp->local.port;
    rtp->parent = rtcp->parent = rtp->rtp_owner = rtcp->rtp_owner = obj->id;
    rtcp->is_rtcp = true;
    if (params.contains("remote")) obj->remote = parse_endpoint(params, "remote");
    add(s, std::move(rtp));
    add(s, std::move(rtcp));
    return add(s, std::move(obj)).id;
  }

  std::string create_ice(Session& s, const json& params) {
    auto obj = std::make_unique<IceObject>(new_id(), Cls::Ice, s.token);
    const auto components = params.value("components", json::array());
    if (!components.is_array()) fail(400, "components must be an array of object ids");
    std::vector<std::string> members;
    for (const auto& c : components) {
      if (!c.is_string()) fail(400, "components must be an array of object ids");
      auto& member = owned(s, c.get<std::string>());
      if (!member.parent.empty()) fail(409, member.id + " already belongs to " + member.parent);
      if (member.cls == Cls::Udp) {
        obj->udp_ids.push_back(member.id);
      } else if (member.cls == Cls::Rtp) {
        obj->udp_ids.push_back(static_cast<RtpObject&>(member).rtp_id);
      } else if (member.cls != Cls::Tcp) {
        fail(400, "ICE components must be UDP, TCP or RTP transports");
      }
      members.push_back(member.id);
    }
    if (components.empty()) {
      require_bind(s);
      auto u = make_udp(s, 0);
      u->parent = obj->id;
      obj->udp_ids.push_back(u->id);
      members.push_back(u->id);
      add(s, std::move(u));
    }
    for (const auto& m : members) objects.at(m)->parent = obj->id;
    std::vector<Endpoint> endpoints;
    for (const auto& id : obj->udp_ids) {
      auto& u = udp(id);
      u.ice_owner = obj->id;
      endpoints.push_back(u.local);
    }
    obj->component_ids = members;
    obj->agent = std::make_unique<ice::IceAgent>(
        std::move(endpoints), config.reflector,
        [this] {
          std::uniform_int_distribution<std::uint64_t> dist;
          char buf[17];
          std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(dist(rng)));
          return std::string(buf);
        },
        config.ice_timing);
    return add(s, std::move(obj)).id;
  }

  static void set_source_codec(SourceObject& src, const std::string& name) {
    auto codec = media::CodecRegistry::defaults().by_name(name);
    if (!codec || codec->kind != src.kind) fail(400, "codec " + name + " does not fit this device");
    src.codec = name;
  }

  std::string create_source(Session& s, Cls cls, const json& params) {
    if (!approve(s, ApprovalKind::MediaCapture, std::string(to_string(cls)))) fail(403, "media capture denied by user");
    auto obj = std::make_unique<SourceObject>(new_id(), cls, s.token);
    try {
      if (cls == Cls::Microphone) {
        obj->kind = media::MediaKind::Audio;
        obj->tone.emplace(params.value("frequency", 440.0), params.value("amplitude", 8000.0));
        set_source_codec(*obj, params.value("codec", std::string("tone")));
      } else {
        obj->kind = media::MediaKind::Video;
        const int fps = params.value("fps", 25);
        const int bytes = params.value("frame_bytes", 96);
        if (fps < 1 || fps > 60) fail(400, "fps must be 1..60");
        if (bytes < 16 || bytes > 1200) fail(400, "frame_bytes must be 16..1200");
        obj->pattern.emplace(fps, static_cast<std::size_t>(bytes));
        set_source_codec(*obj, params.value("codec", std::string("pattern")));
      }
    } catch (const std::invalid_argument& e) {
      fail(400, e.what());
    } catch (const json::exception& e) {
      fail(400, e.what());
    }
    obj->running = params.value("start", true);
    obj->next_at = clock.now();
    return add(s, std::move(obj)).id;
  }

  std::string create_sink(Session& s, Cls cls, const json& params) {
    auto obj = std::make_unique<SinkObject>(new_id(), cls, s.token);
    obj->kind = cls == Cls::Speaker ? media::MediaKind::Audio : media::MediaKind::Video;
    if (params.value("to_client", false)) {
      if (!approve(s, ApprovalKind::MediaToClient, std::string(to_string(cls)))) {
        fail(403, "media delivery to the client denied by user");
      }
      obj->to_client = true;
    }
    return add(s, std::move(obj)).id;
  }

  json describe(const Object& obj) const {
    json j = obj.state();
    j["id"] = obj.id;
    j["class"] = to_string(obj.cls);
    if (!obj.parent.empty()) j["parent"] = obj.parent;
    return j;
  }

  void destroy_locked(const std::string& id, const std::string& reason) {
    auto it = objects.find(id);
    if (it == objects.end()) return;
    std::vector<std::string> children;
    for (const auto& [oid, o] : objects) {
      if (o->parent == id) children.push_back(oid);
    }
    for (const auto& c : children) destroy_locked(c, reason);
    std::erase_if(pipelines, [&](const auto& kv) { return kv.second.source == id || kv.second.sink == id; });
    const auto token = it->second->token;
    if (auto sit = sessions.find(token); sit != sessions.end()) sit->second.objects.erase(id);
    objects.erase(it);
    emit(token, id, "object-closed", {{"reason", reason}});
  }

  // --- methods --------------------------------------------------------------

  std::string connect_locked(Session& s, Object& source, const std::string& sink_id) {
    auto& sink = owned(s, sink_id);
    const bool audio_sink = sink.cls == Cls::Speaker;
    const bool video_sink = sink.cls == Cls::Display;
    bool ok = false;
    switch (source.cls) {
      case Cls::Microphone: ok = sink.cls == Cls::Rtp || audio_sink; break;
      case Cls::Camera: ok = sink.cls == Cls::Rtp || video_sink; break;
      case Cls::Rtp: ok = audio_sink || video_sink; break;
      default: break;
    }
    if (!ok) {
      fail(409, "cannot connect " + std::string(to_string(source.cls)) + " to " + std::string(to_string(sink.cls)));
    }
    Pipeline p{"pl" + std::to_string(next_pipeline++), s.token, source.id, sink.id};
    pipelines.emplace(p.id, p);
    return p.id;
  }

  void on_ice_changes(IceObject& ice) {
    for (const auto phase : ice.agent->take_phase_changes()) {
      json payload = {{"phase", ice::to_string(phase)}};
      if (phase == ice::Phase::Gathered) payload["local_candidates"] = ice.agent->local_candidates();
      if (phase == ice::Phase::Failed) payload["failures"] = ice.agent->failures_json();
      if (phase == ice::Phase::Connected) {
        const auto& sel = *ice.agent->selected();
        payload["selected_pair"] = {{"local", sel.local}, {"remote", sel.remote}};
        auto& u = udp(ice.udp_ids.at(sel.component));
        if (!u.rtp_owner.empty()) {
          auto& rtp = static_cast<RtpObject&>(*objects.at(u.rtp_owner));
          rtp.remote = Endpoint{sel.remote.address, static_cast<std::uint16_t>(sel.remote.port)};
        }
      }
      emit(ice.token, ice.id, "ice-phase", std::move(payload));
    }
  }

  json invoke_ice(Session& s, IceObject& ice, const std::string& method, const json& args) {
    IceIo io(*this, s, ice);
    const auto now = clock.now();
    auto remotes = [&] {
      if (!args.is_object() || !args.contains("candidates")) fail(400, "missing candidates");
      return signaling::parse_candidates(args["candidates"]);
    };
    if (method == "gather") {
      ice.agent->gather(now, io);
    } else if (method == "set_remote_candidates") {
      ice.agent->set_remote_candidates(remotes());
    } else if (method == "start_checks") {
      ice.agent->start_checks(now, io);
    } else if (method == "run") {
      ice.agent->set_remote_candidates(remotes());
      ice.agent->start_checks(now, io);
    } else if (method == "send") {
      if (ice.agent->phase() != ice::Phase::Connected) fail(409, "ICE send is only valid once connected");
      const auto data = parse_data(args);
      const auto& sel = *ice.agent->selected();
      const Endpoint to{sel.remote.address, static_cast<std::uint16_t>(sel.remote.port)};
      if (!io.send(sel.component, to, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()))) {
        fail(403, "send to " + to.address + " denied by user");
      }
      on_ice_changes(ice);
      return {{"queued", true}, {"bytes", data.size()}};
    } else if (method != "stats") {
      fail(409, "IceTransport has no method " + method);
    }
    on_ice_changes(ice);
    return describe(ice);
  }

  json invoke_locked(Session& s, Object& obj, const std::string& method, const json& args) {
    if (method == "state") return describe(obj);
    if (method == "connect") {
      if (!args.is_object() || !args.contains("sink") || !args["sink"].is_string()) fail(400, "missing sink");
      return {{"pipeline", connect_locked(s, obj, args["sink"].get<std::string>())}};
    }
    if (method == "disconnect") {
      const auto pid = args.value("pipeline", std::string());
      auto it = pipelines.find(pid);
      if (it == pipelines.end() || it->second.source != obj.id) fail(404, "unknown pipeline " + pid);
      pipelines.erase(it);
      return {{"disconnected", pid}};
    }
    switch (obj.cls) {
      case Cls::Udp: {
        auto& u = static_cast<UdpObject&>(obj);
        if (method == "send") {
          if (!u.rtp_owner.empty()) fail(409, "UDP member of an RTP transport cannot send raw datagrams");
          const auto to = parse_endpoint(args, "to");
          const auto data = parse_data(args);
          if (!approve(s, ApprovalKind::SendToNewPeer, to.address)) fail(403, "send to " + to.address + " denied by user");
          send_udp(u, to, data);
          return {{"queued", true}, {"bytes", data.size()}};
        }
        if (method == "recv-poll") {
          json out = json::array();
          for (auto& d : u.received) out.push_back(std::move(d));
          u.received.clear();
          return {{"datagrams", std::move(out)}};
        }
        if (method == "stats") return describe(u);
        break;
      }
      case Cls::Tcp: {
        auto& t = static_cast<TcpObject&>(obj);
        if (method == "send") {
          const auto data = parse_data(args);
          t.conn->send(data);
          t.bytes_out += data.size();
          return {{"queued", true}, {"bytes", data.size()}};
        }
        if (method == "stats") return describe(t);
        break;
      }
      case Cls::Rtp: {
        auto& r = static_cast<RtpObject&>(obj);
        if (method == "set_remote") {
          r.remote = parse_endpoint(args, "remote");
          return describe(r);
        }
        if (method == "stats") return describe(r);
        break;
      }
      case Cls::Ice: return invoke_ice(s, static_cast<IceObject&>(obj), method, args);
      case Cls::Microphone:
      case Cls::Camera: {
        auto& src = static_cast<SourceObject&>(obj);
        if (method == "start") {
          if (!src.running) src.next_at = clock.now();
          src.running = true;
          return describe(src);
        }
        if (method == "stop") {
          src.running = false;
          return describe(src);
        }
        if (method == "set-attribute") {
          const auto name = args.value("name", std::string());
          if (!args.contains("value")) fail(400, "missing value");
          const auto& value = args["value"];
          try {
            if (name == "volume") {
              src.volume = std::clamp(value.get<double>(), 0.0, 1.0);
              if (src.tone) src.tone->set_amplitude(8000.0 * src.volume);
            } else if (name == "codec") {
              set_source_codec(src, value.get<std::string>());
            } else if (name == "frequency" && src.tone) {
              src.tone.emplace(value.get<double>(), src.tone->amplitude());
            } else {
              fail(400, "unknown attribute " + name);
            }
          } catch (const std::invalid_argument& e) {
            fail(400, e.what());
          } catch (const json::exception& e) {
            fail(400, e.what());
          }
          return describe(src);
        }
        if (method == "stats") return describe(src);
        break;
      }
      case Cls::Speaker:
      case Cls::Display: {
        auto& sink = static_cast<SinkObject&>(obj);
        if (method == "stats") return describe(sink);
        if (method == "set-attribute") {
          const auto name = args.value("name", std::string());
          try {
            if (name == "to_client") {
              const bool on = args.at("value").get<bool>();
              if (on && !approve(s, ApprovalKind::MediaToClient, std::string(to_string(sink.cls)))) {
                fail(403, "media delivery to the client denied by user");
              }
              sink.to_client = on;
            } else if (name == "volume") {
              sink.volume = std::clamp(args.at("value").get<double>(), 0.0, 1.0);
            } else {
              fail(400, "unknown attribute " + name);
            }
          } catch (const json::exception& e) {
            fail(400, e.what());
          }
          return describe(sink);
        }
        break;
      }
    }
    fail(409, std::string(to_string(obj.cls)) + " has no method " + method);
  }

  // --- media ----------------------------------------------------------------

  void deliver_to_sink(SinkObject& sink, const std::string& pipeline, std::uint16_t seq, std::uint8_t pt,
                       std::span<const std::uint8_t> data) {
    sink.stats.on_frame(seq, data.size());
    if (sink.to_client) {
      emit(sink.token, sink.id, "media-frame",
           {{"pipeline", pipeline}, {"seq", seq}, {"payload_type", pt}, {"data", base64_encode(data)}});
    }
  }

  void deliver_frame(SourceObject& src, const media::MediaFrame& frame) {
    const auto codec = media::CodecRegistry::defaults().by_name(src.codec);
    const std::uint8_t pt = codec ? codec->payload_type : 0;
    for (auto& [pid, p] : pipelines) {
      if (p.source != src.id) continue;
      auto& sink = *objects.at(p.sink);
      if (sink.cls == Cls::Rtp) {
        auto& rtp = static_cast<RtpObject&>(sink);
        const auto packet = rtp.stream.next(pt, frame.data, src.ticks());
        if (!rtp.remote) {
          ++rtp.unsent;
          continue;
        }
        auto& session = sessions.at(rtp.token);
        if (!approve(session, ApprovalKind::SendToNewPeer, rtp.remote->address)) {
          ++rtp.denied;
          continue;
        }
        send_udp(udp(rtp.rtp_id), *rtp.remote, media::rtp_serialize(packet));
        ++rtp.sent;
      } else {
        deliver_to_sink(static_cast<SinkObject&>(sink), pid, static_cast<std::uint16_t>(frame.index & 0xFFFF), pt,
                        frame.data);
      }
    }
  }

  void run_sources(Millis now) {
    for (auto& [id, obj] : objects) {
      if (obj->cls != Cls::Microphone && obj->cls != Cls::Camera) continue;
      auto& src = static_cast<SourceObject&>(*obj);
      if (!src.running) continue;
      const auto step = src.frame_duration();
      if (now - src.next_at > 1s) src.next_at = now - step;
      while (src.next_at <= now) {
        const auto frame = src.next_frame();
        ++src.frames;
        deliver_frame(src, frame);
        src.next_at += step;
      }
    }
  }

  void send_reports(Millis now) {
    for (auto& [id, obj] : objects) {
      if (obj->cls != Cls::Rtp) continue;
      auto& rtp = static_cast<RtpObject&>(*obj);
      if (!rtp.remote || rtp.sent == 0 || now - rtp.last_report < config.rtcp_interval) continue;
      rtp.last_report = now;
      auto& session = sessions.at(rtp.token);
      if (!approve(session, ApprovalKind::SendToNewPeer, rtp.remote->address)) continue;
      media::RtcpSenderReport sr{rtp.stream.ssrc(), static_cast<std::uint64_t>(now.count()),
                                 rtp.stream.last_timestamp(), rtp.stream.packets(), rtp.stream.octets()};
      const Endpoint to{rtp.remote->address, static_cast<std::uint16_t>(rtp.remote->port + 1)};
      send_udp(udp(rtp.rtcp_id), to, media::rtcp_serialize(sr));
      ++rtp.rtcp_sent;
    }
  }

  // --- inbound --------------------------------------------------------------

  void on_inbound(Inbound& in, Millis now) {
    auto it = objects.find(in.object_id);
    if (it == objects.end()) return;
    auto& obj = *it->second;
    if (obj.cls == Cls::Tcp) {
      auto& t = static_cast<TcpObject&>(obj);
      t.bytes_in += in.data.size();
      emit(t.token, t.id, "tcp-recv", {{"data", base64_encode(in.data)}});
      return;
    }
    if (obj.cls != Cls::Udp) return;
    auto& u = static_cast<UdpObject&>(obj);
    u.bytes_in += in.data.size();
    ++u.packets_in;
    if (!u.ice_owner.empty()) {
      auto& ice = static_cast<IceObject&>(*objects.at(u.ice_owner));
      const auto idx = static_cast<std::size_t>(
          std::find(ice.udp_ids.begin(), ice.udp_ids.end(), u.id) - ice.udp_ids.begin());
      IceIo io(*this, sessions.at(ice.token), ice);
      const bool consumed = ice.agent->on_datagram(idx, in.from, in.data, now, io);
      on_ice_changes(ice);
      if (consumed) return;
    }
    if (!u.rtp_owner.empty()) {
      auto& rtp = static_cast<RtpObject&>(*objects.at(u.rtp_owner));
      try {
        if (u.is_rtcp) {
          media::rtcp_parse_sender_report(in.data);
          ++rtp.rtcp_received;
          return;
        }
        const auto packet = media::rtp_parse(in.data);
        ++rtp.received;
        for (auto& [pid, p] : pipelines) {
          if (p.source != rtp.id) continue;
          deliver_to_sink(static_cast<SinkObject&>(*objects.at(p.sink)), pid, packet.seq, packet.payload_type,
                          packet.payload);
        }
      } catch (const std::exception&) {
        ++rtp.malformed;
      }
      return;
    }
    json datagram = {{"from", in.from.to_string()}, {"data", base64_encode(in.data)}};
    u.received.push_back(datagram);
    if (u.received.size() > kRecvBuffer) u.received.pop_front();
    emit(u.token, u.id, "udp-recv", std::move(datagram));
  }

  void reap(Millis now) {
    std::vector<std::string> dead;
    for (const auto& [token, s] : sessions) {
      if (expired(s, now)) dead.push_back(token);
    }
    for (const auto& token : dead) {
      auto ids = sessions.at(token).objects;
      for (const auto& id : ids) destroy_locked(id, "token-expired");
      for (auto& slot : sessions.at(token).streams) {
        slot.queue->close(json{{"type", "error"}, {"payload", {{"code", 401}, {"message", "token expired"}}}});
      }
      sessions.erase(token);
    }
  }

  void tick() {
    std::vector<Inbound> batch;
    {
      std::lock_guard lock(inbox_mu);
      batch.swap(inbox);
    }
    std::lock_guard lock(mu);
    const auto now = clock.now();
    for (auto& in : batch) on_inbound(in, now);
    for (auto& [id, obj] : objects) {
      if (obj->cls != Cls::Ice) continue;
      auto& ice = static_cast<IceObject&>(*obj);
      IceIo io(*this, sessions.at(ice.token), ice);
      ice.agent->advance(now, io);
      on_ice_changes(ice);
    }
    run_sources(now);
    send_reports(now);
    if (now - last_reap >= config.reaper_interval) {
      last_reap = now;
      reap(now);
    }
  }

  void shutdown() {
    std::lock_guard lock(mu);
    for (auto& [token, s] : sessions) {
      for (auto& slot : s.streams) slot.queue->close();
      s.streams.clear();
    }
    pipelines.clear();
    objects.clear();
  }

  Network& network;
  const Clock& clock;
  ApprovalPolicy& policy;
  AdaptorConfig config;

  std::mutex inbox_mu;
  std::vector<Inbound> inbox;

  mutable std::mutex mu;
  std::map<std::string, Session> sessions;
  std::map<std::string, std::unique_ptr<Object>> objects;
  std::map<std::string, Pipeline> pipelines;
  std::set<std::tuple<std::string, ApprovalKind, std::string>> always;
  std::vector<ApprovalRecord> log;
  std::uint64_t next_object = 1, next_pipeline = 1, next_stream = 1;
  std::uint64_t sent = 0;
  std::mt19937_64 rng;
  Millis last_reap{0};

  std::jthread ticker;
};

Adaptor::Adaptor(Network& network, const Clock& clock, ApprovalPolicy& policy, AdaptorConfig config)
    : impl_(std::make_shared<Impl>(network, clock, policy, std::move(config))) {}

Adaptor::~Adaptor() {
  stop();
  impl_->shutdown();
}

AppGrant Adaptor::authenticate(const std::string& app_id, const std::optional<std::string>& prior_token) {
  return impl_->authenticate(app_id, prior_token);
}

json Adaptor::create_object(const std::string& token, const std::string& cls, const json& params) {
  std::lock_guard lock(impl_->mu);
  auto& s = impl_->session_for(token);
  const auto c = class_from_string(cls);
  if (!c) fail(400, "unknown object class " + cls);
  if (!params.is_null() && !params.is_object()) fail(400, "params must be an object");
  const auto id = impl_->create_locked(s, *c, params.is_null() ? json::object() : params);
  return impl_->describe(*impl_->objects.at(id));
}

json Adaptor::invoke(const std::string& token, const std::string& object_id, const std::string& method,
                     const json& args) {
  std::lock_guard lock(impl_->mu);
  auto& s = impl_->session_for(token);
  auto& obj = impl_->owned(s, object_id);
  if (method == "close") {
    if (!obj.parent.empty()) fail(409, object_id + " is closed through " + obj.parent);
    impl_->destroy_locked(object_id, "closed");
    return {{"closed", object_id}};
  }
  return impl_->invoke_locked(s, obj, method, args.is_null() ? json::object() : args);
}

void Adaptor::close_object(const std::string& token, const std::string& object_id) {
  invoke(token, object_id, "close", json::object());
}

json Adaptor::list_objects(const std::string& token) {
  std::lock_guard lock(impl_->mu);
  auto& s = impl_->session_for(token);
  json objs = json::array();
  for (const auto& id : s.objects) objs.push_back(impl_->describe(*impl_->objects.at(id)));
  json pls = json::array();
  for (const auto& [pid, p] : impl_->pipelines) {
    if (p.token == token) pls.push_back({{"id", pid}, {"source", p.source}, {"sink", p.sink}});
  }
  return {{"objects", std::move(objs)}, {"pipelines", std::move(pls)}};
}

std::unique_ptr<EventStream> Adaptor::events(const std::string& token) { return impl_->events(token); }

void Adaptor::tick() { impl_->tick(); }

void Adaptor::start(Millis period) {
  if (impl_->ticker.joinable()) return;
  impl_->ticker = std::jthread([impl = impl_.get(), period](std::stop_token st) {
    while (!st.stop_requested()) {
      impl->tick();
      std::this_thread::sleep_for(period);
    }
  });
}

void Adaptor::stop() {
  if (!impl_->ticker.joinable()) return;
  impl_->ticker.request_stop();
  impl_->ticker.join();
}

std::vector<ApprovalRecord> Adaptor::approvals() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

std::uint64_t Adaptor::datagrams_sent() const {
  std::lock_guard lock(impl_->mu);
  return impl_->sent;
}

std::size_t Adaptor::object_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->objects.size();
}

std::size_t Adaptor::session_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->sessions.size();
}

}  // namespace webcomm::adaptor
