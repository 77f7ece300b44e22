#pragma once

#include "webcomm/core/encoding.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>

namespace webcomm::media {

/// RTP fixed header (RFC 3550 section 5.1) without CSRCs or extensions.
struct RtpPacket {
  bool marker = false;
  std::uint8_t payload_type = 0;
  std::uint16_t seq = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;
  Bytes payload;

  bool operator==(const RtpPacket&) const = default;
};

constexpr std::size_t kRtpHeaderSize = 12;

class RtpParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 12-byte header followed by the payload; multi-byte fields big-endian.
Bytes rtp_serialize(const RtpPacket& packet);
/// Accepts CSRC lists, header extensions and padding but drops them.
/// Throws RtpParseError on short input or version != 2.
RtpPacket rtp_parse(std::span<const std::uint8_t> data);

/// Minimal RTCP sender report: header, SSRC and sender info, no report
/// blocks (28 bytes).
struct RtcpSenderReport {
  std::uint32_t ssrc = 0;
  std::uint64_t ntp_timestamp = 0;
  std::uint32_t rtp_timestamp = 0;
  std::uint32_t packet_count = 0;
  std::uint32_t octet_count = 0;

  bool operator==(const RtcpSenderReport&) const = default;
};

constexpr std::uint8_t kRtcpSenderReportType = 200;

Bytes rtcp_serialize(const RtcpSenderReport& report);
RtcpSenderReport rtcp_parse_sender_report(std::span<const std::uint8_t> data);

/// Stamps outgoing packets for one stream: seq +1 per packet (wrapping at
/// 2^16), timestamp advanced by the caller-supplied tick count.
class RtpStream {
 public:
  RtpStream(std::uint32_t ssrc, std::uint16_t first_seq, std::uint32_t first_timestamp)
      : ssrc_(ssrc), seq_(first_seq), timestamp_(first_timestamp) {}

  RtpPacket next(std::uint8_t payload_type, Bytes payload, std::uint32_t ticks);

  std::uint32_t ssrc() const { return ssrc_; }
  std::uint32_t packets() const { return packets_; }
  std::uint32_t octets() const { return octets_; }
  std::uint32_t last_timestamp() const { return timestamp_; }

 private:
  std::uint32_t ssrc_;
  std::uint16_t seq_;
  std::uint32_t timestamp_;
  std::uint32_t packets_ = 0;
  std::uint32_t octets_ = 0;
  bool started_ = false;
};

}  // namespace webcomm::media
