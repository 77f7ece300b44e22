#pragma once

#include "check.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace webcomm::testing {

/// RTP fixed header fields as laid out in RFC 3550 5.1, written and read
/// bit by bit (MSB first) from the field table rather than with byte math.
struct RtpFields {
  unsigned version = 2;
  unsigned padding = 0;
  unsigned extension = 0;
  unsigned csrc_count = 0;
  unsigned marker = 0;
  unsigned payload_type = 0;
  std::uint32_t seq = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;

  bool operator==(const RtpFields&) const = default;
};

std::vector<std::uint8_t> oracle_rtp_header(const RtpFields& f);
/// Reads the first 12 bytes; requires data.size() >= 12.
RtpFields oracle_rtp_fields(std::span<const std::uint8_t> data);

/// `count` random packets through rtp_serialize/rtp_parse compared field by
/// field against the oracle.
CheckResult check_rtp_layout(int count, std::uint64_t seed);

/// Seq +1 mod 2^16 and timestamp + ticks mod 2^32 across `count` packets
/// of one RtpStream, starting near both wrap points.
CheckResult check_rtp_stream(int count, std::uint64_t seed);

}  // namespace webcomm::testing
