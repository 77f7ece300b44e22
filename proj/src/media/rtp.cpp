#include "webcomm/media/rtp.hpp"

namespace webcomm::media {
namespace {

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put32(Bytes& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v));
}

std::uint16_t get16(std::span<const std::uint8_t> d, std::size_t at) {
  return static_cast<std::uint16_t>((d[at] << 8) | d[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> d, std::size_t at) {
  return (static_cast<std::uint32_t>(get16(d, at)) << 16) | get16(d, at + 2);
}

}  // namespace

Bytes rtp_serialize(const RtpPacket& packet) {
  Bytes out;
  out.reserve(kRtpHeaderSize + packet.payload.size());
  out.push_back(0x80);  // V=2, P=0, X=0, CC=0
  out.push_back(static_cast<std::uint8_t>((packet.marker ? 0x80 : 0x00) | (packet.payload_type & 0x7F)));
  put16(out, packet.seq);
  put32(out, packet.timestamp);
  put32(out, packet.ssrc);
  out.insert(out.end(), packet.payload.begin(), packet.payload.end());
  return out;
}

RtpPacket rtp_parse(std::span<const std::uint8_t> data) {
  if (data.size() < kRtpHeaderSize) throw RtpParseError("rtp: packet shorter than 12 bytes");
  if ((data[0] >> 6) != 2) throw RtpParseError("rtp: version is not 2");
  const bool padding = (data[0] & 0x20) != 0;
  const bool extension = (data[0] & 0x10) != 0;
  const std::size_t csrc_count = data[0] & 0x0F;

  RtpPacket p;
  p.marker = (data[1] & 0x80) != 0;
  p.payload_type = data[1] & 0x7F;
  p.seq = get16(data, 2);
  p.timestamp = get32(data, 4);
  p.ssrc = get32(data, 8);

  std::size_t offset = kRtpHeaderSize + 4 * csrc_count;
  if (offset > data.size()) throw RtpParseError("rtp: truncated CSRC list");
  if (extension) {
    if (offset + 4 > data.size()) throw RtpParseError("rtp: truncated extension header");
    offset += 4 + 4 * static_cast<std::size_t>(get16(data, offset + 2));
    if (offset > data.size()) throw RtpParseError("rtp: truncated extension");
  }
  std::size_t end = data.size();
  if (padding) {
    const std::size_t pad = data.back();
    if (pad == 0 || offset + pad > end) throw RtpParseError("rtp: bad padding");
    end -= pad;
  }
  p.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(offset), data.begin() + static_cast<std::ptrdiff_t>(end));
  return p;
}

Bytes rtcp_serialize(const RtcpSenderReport& r) {
  Bytes out;
  out.reserve(28);
  out.push_back(0x80);  // V=2, P=0, RC=0
  out.push_back(kRtcpSenderReportType);
  put16(out, 6);  // length in 32-bit words minus one
  put32(out, r.ssrc);
  put32(out, static_cast<std::uint32_t>(r.ntp_timestamp >> 32));
  put32(out, static_cast<std::uint32_t>(r.ntp_timestamp));
  put32(out, r.rtp_timestamp);
  put32(out, r.packet_count);
  put32(out, r.octet_count);
  return out;
}

RtcpSenderReport rtcp_parse_sender_report(std::span<const std::uint8_t> data) {
  if (data.size() < 28) throw RtpParseError("rtcp: sender report shorter than 28 bytes");
  if ((data[0] >> 6) != 2) throw RtpParseError("rtcp: version is not 2");
  if (data[1] != kRtcpSenderReportType) throw RtpParseError("rtcp: not a sender report");
  RtcpSenderReport r;
  r.ssrc = get32(data, 4);
  r.ntp_timestamp = (static_cast<std::uint64_t>(get32(data, 8)) << 32) | get32(data, 12);
  r.rtp_timestamp = get32(data, 16);
  r.packet_count = get32(data, 20);
  r.octet_count = get32(data, 24);
  return r;
}

RtpPacket RtpStream::next(std::uint8_t payload_type, Bytes payload, std::uint32_t ticks) {
  if (started_) {
    ++seq_;
    timestamp_ += ticks;
  }
  started_ = true;
  RtpPacket p;
  p.payload_type = payload_type;
  p.seq = seq_;
  p.timestamp = timestamp_;
  p.ssrc = ssrc_;
  p.payload = std::move(payload);
  ++packets_;
  octets_ += static_cast<std::uint32_t>(p.payload.size());
  return p;
}

}  // namespace webcomm::media
