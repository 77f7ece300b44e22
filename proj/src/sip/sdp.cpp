#include "webcomm/sip/sdp.hpp"

#include "webcomm/core/endpoint.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace webcomm::sip {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto w : split(s, ' ')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

template <typename T>
T number(std::string_view s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw SdpError(std::string("bad ") + what);
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string format_sdp(const SdpBlob& sdp) {
  std::ostringstream out;
  out << "v=0\r\n";
  out << "o=- " << sdp.session_id << " " << sdp.version << " IN IP4 " << sdp.origin_address << "\r\n";
  out << "s=webcomm\r\n";
  out << "c=IN IP4 " << sdp.connection_address << "\r\n";
  out << "t=0 0\r\n";
  out << "m=audio " << sdp.port << " RTP/AVP";
  for (const auto& c : sdp.codecs) out << " " << static_cast<int>(c.payload_type);
  out << "\r\n";
  for (const auto& c : sdp.codecs) {
    out << "a=rtpmap:" << static_cast<int>(c.payload_type) << " " << c.encoding << "/" << c.clock_rate << "\r\n";
  }
  int foundation = 1;
  for (const auto& c : sdp.candidates) {
    out << "a=candidate:" << foundation++ << " 1 UDP " << c.priority << " " << c.address << " " << c.port << " typ "
        << c.type << "\r\n";
  }
  return out.str();
}

SdpBlob parse_sdp(std::string_view text) {
  SdpBlob sdp;
  bool have_v = false, have_o = false, have_c = false, have_m = false;
  std::vector<std::uint8_t> pts;
  std::vector<SdpCodec> rtpmaps;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.size() < 2 || line[1] != '=') throw SdpError("bad line");
    const char type = line[0];
    const auto value = line.substr(2);
    switch (type) {
      case 'v':
        if (value != "0") throw SdpError("unsupported version");
        have_v = true;
        break;
      case 'o': {
        auto w = words(value);
        if (w.size() != 6 || w[3] != "IN" || w[4] != "IP4") throw SdpError("bad origin");
        sdp.session_id = number<std::uint64_t>(w[1], "session id");
        sdp.version = number<std::uint64_t>(w[2], "session version");
        sdp.origin_address = std::string(w[5]);
        have_o = true;
        break;
      }
      case 'c': {
        auto w = words(value);
        if (w.size() != 3 || w[0] != "IN" || w[1] != "IP4" || !is_ipv4_literal(w[2])) {
          throw SdpError("bad connection");
        }
        if (have_c) break;
        sdp.connection_address = std::string(w[2]);
        have_c = true;
        break;
      }
      case 'm': {
        auto w = words(value);
        if (have_m) throw SdpError("more than one media line");
        if (w.size() < 3 || w[0] != "audio" || w[2] != "RTP/AVP") throw SdpError("bad media line");
        sdp.port = number<int>(w[1], "port");
        if (sdp.port < 0 || sdp.port > 65535) throw SdpError("bad port");
        for (std::size_t i = 3; i < w.size(); ++i) {
          auto pt = number<int>(w[i], "payload type");
          if (pt < 0 || pt > 127) throw SdpError("bad payload type");
          pts.push_back(static_cast<std::uint8_t>(pt));
        }
        have_m = true;
        break;
      }
      case 'a': {
        if (value.rfind("rtpmap:", 0) == 0) {
          auto w = words(value.substr(7));
          if (w.size() != 2) throw SdpError("bad rtpmap");
          auto pt = number<int>(w[0], "rtpmap payload type");
          auto parts = split(w[1], '/');
          if (parts.size() < 2 || pt < 0 || pt > 127) throw SdpError("bad rtpmap");
          rtpmaps.push_back({static_cast<std::uint8_t>(pt), std::string(parts[0]), number<int>(parts[1], "clock rate")});
        } else if (value.rfind("candidate:", 0) == 0) {
          auto w = words(value.substr(10));
          if (w.size() < 8 || lower(w[2]) != "udp" || w[6] != "typ" || !is_ipv4_literal(w[4])) {
            throw SdpError("bad candidate");
          }
          signaling::TransportCandidate c;
          c.priority = number<std::int64_t>(w[3], "candidate priority");
          c.address = std::string(w[4]);
          c.port = number<int>(w[5], "candidate port");
          c.type = std::string(w[7]);
          sdp.candidates.push_back(std::move(c));
        }
        break;
      }
      default:
        break;
    }
  }
  if (!have_v || !have_o || !have_c || !have_m) throw SdpError("missing v=, o=, c= or m= line");
  for (auto pt : pts) {
    auto it = std::find_if(rtpmaps.begin(), rtpmaps.end(), [&](const SdpCodec& c) { return c.payload_type == pt; });
    sdp.codecs.push_back(it != rtpmaps.end() ? *it : SdpCodec{pt, "", 0});
  }
  return sdp;
}

SdpBlob to_sdp(const signaling::SessionDescriptor& session, std::uint64_t session_id,
               const media::CodecRegistry& registry) {
  if (session.candidates.empty()) throw SdpError("no candidates");
  auto top = *std::max_element(session.candidates.begin(), session.candidates.end(),
                               [](const auto& a, const auto& b) { return a.priority < b.priority; });
  SdpBlob sdp;
  sdp.session_id = session_id;
  sdp.version = 1;
  sdp.origin_address = top.address;
  sdp.connection_address = top.address;
  sdp.port = top.port;
  for (const auto& name : media::preference_order(session)) {
    if (auto c = registry.by_name(name)) sdp.codecs.push_back({c->payload_type, c->name, c->clock_rate});
  }
  if (session.candidates.size() > 1) sdp.candidates = session.candidates;
  return sdp;
}

signaling::SessionDescriptor from_sdp(const SdpBlob& sdp, const media::CodecRegistry& registry) {
  signaling::SessionDescriptor s;
  s.ice = false;
  if (!sdp.candidates.empty()) {
    s.candidates = sdp.candidates;
  } else {
    s.candidates.push_back({"udp", sdp.connection_address, sdp.port, 1, "host"});
  }
  for (const auto& c : sdp.codecs) {
    std::optional<media::CodecDescriptor> known;
    if (!c.encoding.empty()) {
      known = registry.by_name(lower(c.encoding));
      if (known && known->clock_rate != c.clock_rate) known.reset();
    } else {
      known = registry.by_payload_type(c.payload_type);
    }
    if (known && std::find(s.codecs_supported.begin(), s.codecs_supported.end(), known->name) == s.codecs_supported.end()) {
      s.codecs_supported.push_back(known->name);
    }
  }
  if (!s.codecs_supported.empty()) s.codecs_preferred.push_back(s.codecs_supported.front());
  return s;
}

}  // namespace webcomm::sip
