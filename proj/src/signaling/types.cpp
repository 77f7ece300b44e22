#include "webcomm/signaling/types.hpp"

#include "webcomm/core/endpoint.hpp"
#include "webcomm/core/error.hpp"

#include <algorithm>
#include <set>

namespace webcomm::signaling {

void validate_candidates(const std::vector<TransportCandidate>& candidates) {
  if (candidates.empty()) fail(400, "candidates must not be empty");
  std::set<std::int64_t> priorities;
  for (const auto& c : candidates) {
    if (c.kind != "udp" && c.kind != "tcp") fail(400, "candidate kind must be udp or tcp");
    if (!is_ipv4_literal(c.address)) fail(400, "candidate address must be an IP literal");
    if (c.port <= 1024 || c.port > 65535) fail(400, "candidate port must be in 1025..65535");
    if (c.priority < 0) fail(400, "candidate priority must be >= 0");
    if (!priorities.insert(c.priority).second) fail(400, "candidate priorities must be unique");
  }
}

void validate_session(const SessionDescriptor& session) {
  validate_candidates(session.candidates);
  for (const auto& codec : session.codecs_preferred) {
    if (std::find(session.codecs_supported.begin(), session.codecs_supported.end(), codec) ==
        session.codecs_supported.end()) {
      fail(400, "preferred codec '" + codec + "' is not in codecs_supported");
    }
  }
}

void to_json(json& j, const TransportCandidate& c) {
  j = {{"kind", c.kind}, {"address", c.address}, {"port", c.port}, {"priority", c.priority}, {"type", c.type}};
}

void from_json(const json& j, TransportCandidate& c) {
  c.kind = j.at("kind").get<std::string>();
  c.address = j.at("address").get<std::string>();
  c.port = j.at("port").get<int>();
  c.priority = j.value("priority", std::int64_t{0});
  c.type = j.value("type", std::string("host"));
}

void to_json(json& j, const SessionDescriptor& s) {
  j = {{"candidates", s.candidates},
       {"codecs_supported", s.codecs_supported},
       {"codecs_preferred", s.codecs_preferred},
       {"ice", s.ice}};
  if (s.media_stream_url) j["media_stream_url"] = *s.media_stream_url;
}

void from_json(const json& j, SessionDescriptor& s) {
  s.candidates = j.at("candidates").get<std::vector<TransportCandidate>>();
  s.codecs_supported = j.at("codecs_supported").get<std::vector<std::string>>();
  s.codecs_preferred = j.value("codecs_preferred", std::vector<std::string>{});
  s.ice = j.value("ice", true);
  if (j.contains("media_stream_url") && j["media_stream_url"].is_string()) {
    s.media_stream_url = j["media_stream_url"].get<std::string>();
  } else {
    s.media_stream_url.reset();
  }
}

json contact_to_json(const ContactRecord& c) {
  return {{"aor", c.aor},
          {"contact_id", c.contact_id},
          {"contact_path", "/login/" + c.aor + "/" + c.contact_id},
          {"candidates", c.candidates},
          {"registered_at", to_seconds(c.registered_at)},
          {"expires_at", to_seconds(c.expires_at)},
          {"presence", c.presence}};
}

ContactRecord contact_from_json(const json& j) {
  ContactRecord c;
  c.aor = j.at("aor").get<std::string>();
  c.contact_id = j.at("contact_id").get<std::string>();
  c.candidates = j.at("candidates").get<std::vector<TransportCandidate>>();
  c.registered_at = Millis{static_cast<std::int64_t>(j.at("registered_at").get<double>() * 1000.0 + 0.5)};
  c.expires_at = Millis{static_cast<std::int64_t>(j.at("expires_at").get<double>() * 1000.0 + 0.5)};
  c.presence = j.value("presence", json::object());
  return c;
}

json participant_to_json(const ParticipantEntry& p) {
  return {{"participant_id", p.participant_id},
          {"aor", p.aor},
          {"session", p.session},
          {"joined_at", to_seconds(p.joined_at)}};
}

ParticipantEntry participant_from_json(const json& j) {
  ParticipantEntry p;
  p.participant_id = j.at("participant_id").get<std::string>();
  p.aor = j.at("aor").get<std::string>();
  p.session = j.at("session").get<SessionDescriptor>();
  p.joined_at = Millis{static_cast<std::int64_t>(j.at("joined_at").get<double>() * 1000.0 + 0.5)};
  return p;
}

json conference_to_json(const ConferenceResource& c) {
  json participants = json::array();
  for (const auto& p : c.participants) participants.push_back(participant_to_json(p));
  return {{"call_id", c.call_id},
          {"call_path", "/call/" + c.call_id},
          {"created_at", to_seconds(c.created_at)},
          {"participants", std::move(participants)}};
}

std::vector<TransportCandidate> parse_candidates(const json& j) {
  try {
    if (!j.is_array()) fail(400, "candidates must be an array");
    return j.get<std::vector<TransportCandidate>>();
  } catch (const json::exception& e) {
    fail(400, std::string("malformed candidates: ") + e.what());
  }
}

SessionDescriptor parse_session(const json& j) {
  try {
    if (!j.is_object()) fail(400, "session must be an object");
    return j.get<SessionDescriptor>();
  } catch (const json::exception& e) {
    fail(400, std::string("malformed session: ") + e.what());
  }
}

}  // namespace webcomm::signaling
