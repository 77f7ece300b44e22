#pragma once

#include "webcomm/media/codec.hpp"
#include "webcomm/signaling/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace webcomm::sip {

class SdpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SdpCodec {
  std::uint8_t payload_type = 0;
  std::string encoding;
  int clock_rate = 0;
  bool operator==(const SdpCodec&) const = default;
};

/// The subset of SDP the gateway speaks: origin, one connection address
/// and one audio media line, plus a=candidate lines when there is more than
/// one transport candidate.
struct SdpBlob {
  std::uint64_t session_id = 0;
  std::uint64_t version = 0;
  std::string origin_address;
  std::string connection_address;
  int port = 0;
  std::vector<SdpCodec> codecs;
  std::vector<signaling::TransportCandidate> candidates;

  bool operator==(const SdpBlob&) const = default;
};

std::string format_sdp(const SdpBlob& sdp);
/// Throws SdpError.
SdpBlob parse_sdp(std::string_view text);

/// Codecs outside the registry are skipped. Connection address and port
/// come from the highest-priority candidate. Throws SdpError when the
/// descriptor has no candidates.
SdpBlob to_sdp(const signaling::SessionDescriptor& session, std::uint64_t session_id,
               const media::CodecRegistry& registry = media::CodecRegistry::defaults());
/// Payload types resolve through rtpmap, then the registry's static table;
/// unknown ones are dropped. The result has ice=false: the far end is a
/// plain RTP peer.
signaling::SessionDescriptor from_sdp(const SdpBlob& sdp,
                                      const media::CodecRegistry& registry = media::CodecRegistry::defaults());

}  // namespace webcomm::sip
