#pragma once

#include "webcomm/core/clock.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace webcomm::signaling {

using nlohmann::json;

/// A (kind, address, port, priority) tuple at which an endpoint receives
/// media. `type` is host, srflx or prflx and only matters to ICE.
struct TransportCandidate {
  std::string kind = "udp";
  std::string address;
  int port = 0;
  std::int64_t priority = 0;
  std::string type = "host";

  bool operator==(const TransportCandidate&) const = default;
};

/// JSON session parameters published in a conference participant entry.
struct SessionDescriptor {
  std::vector<TransportCandidate> candidates;
  std::vector<std::string> codecs_supported;
  std::vector<std::string> codecs_preferred;
  std::optional<std::string> media_stream_url;
  /// False when the far end does not run connectivity checks (SIP peers
  /// behind the gateway); media then goes straight to the top candidate.
  bool ice = true;

  bool operator==(const SessionDescriptor&) const = default;
};

struct ContactRecord {
  std::string aor;
  std::string contact_id;
  std::vector<TransportCandidate> candidates;
  Millis registered_at{0};
  Millis expires_at{0};
  json presence = json::object();
};

struct ParticipantEntry {
  std::string participant_id;
  std::string aor;
  SessionDescriptor session;
  Millis joined_at{0};
};

struct ConferenceResource {
  std::string call_id;
  std::vector<ParticipantEntry> participants;
  Millis created_at{0};
  /// Set while the participant list is empty.
  std::optional<Millis> empty_since;
  int next_participant = 1;
};

/// Throws ApiError(400) on violation: empty list, bad kind, non-IP
/// address, port outside 1025..65535, negative or duplicate priority.
void validate_candidates(const std::vector<TransportCandidate>& candidates);
/// Candidates plus codecs_preferred being a subset of codecs_supported.
void validate_session(const SessionDescriptor& session);

void to_json(json& j, const TransportCandidate& c);
void from_json(const json& j, TransportCandidate& c);
void to_json(json& j, const SessionDescriptor& s);
void from_json(const json& j, SessionDescriptor& s);

json contact_to_json(const ContactRecord& c);
ContactRecord contact_from_json(const json& j);
json participant_to_json(const ParticipantEntry& p);
ParticipantEntry participant_from_json(const json& j);
json conference_to_json(const ConferenceResource& c);

/// Parse request bodies, mapping JSON type errors to ApiError(400).
std::vector<TransportCandidate> parse_candidates(const json& j);
SessionDescriptor parse_session(const json& j);

}  // namespace webcomm::signaling
