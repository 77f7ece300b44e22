#include "rtp_oracle.hpp"

#include "webcomm/media/codec.hpp"
#include "webcomm/media/rtp.hpp"
#include "webcomm/media/sources.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace webcomm;
using namespace webcomm::media;
using webcomm::testing::oracle_rtp_fields;
using webcomm::testing::oracle_rtp_header;
using webcomm::testing::RtpFields;

TEST(Rtp, SpecExamplePacketMatchesLayoutOracle) {
  RtpPacket p;
  p.payload_type = 96;
  p.seq = 1;
  p.timestamp = 160;
  p.ssrc = 0x1;
  p.payload = {0xAA, 0xBB};
  const auto wire = rtp_serialize(p);
  ASSERT_EQ(wire.size(), 14u);
  EXPECT_EQ(wire[1] & 0x7F, 96);
  RtpFields f;
  f.payload_type = 96;
  f.seq = 1;
  f.timestamp = 160;
  f.ssrc = 1;
  const auto header = oracle_rtp_header(f);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), wire.begin()));
  EXPECT_EQ(wire[12], 0xAA);
}

TEST(Rtp, MarkerBitAndParseBack) {
  RtpPacket p{true, 127, 0xFFFF, 0xFFFFFFFF, 0xDEADBEEF, {1, 2, 3}};
  const auto wire = rtp_serialize(p);
  const auto fields = oracle_rtp_fields(wire);
  EXPECT_EQ(fields.version, 2);
  EXPECT_EQ(fields.marker, 1);
  EXPECT_EQ(fields.payload_type, 127);
  EXPECT_EQ(rtp_parse(wire), p);
}

TEST(Rtp, LayoutOracleOnRandomPackets) {
  const auto r = webcomm::testing::check_rtp_layout(200, 9);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Rtp, ShortOrWrongVersionRejected) {
  Bytes eleven(11, 0x80);
  EXPECT_THROW(rtp_parse(eleven), RtpParseError);
  Bytes v1(12, 0);
  v1[0] = 0x40;
  EXPECT_THROW(rtp_parse(v1), RtpParseError);
}

TEST(Rtp, CsrcExtensionAndPaddingAreSkipped) {
  RtpFields f;
  f.padding = 1;
  f.extension = 1;
  f.csrc_count = 2;
  f.payload_type = 97;
  f.seq = 7;
  auto wire = oracle_rtp_header(f);
  for (int i = 0; i < 8; ++i) wire.push_back(0x11);  // two CSRCs
  Bytes ext = {0xBE, 0xDE, 0x00, 0x01, 1, 2, 3, 4};
  wire.insert(wire.end(), ext.begin(), ext.end());
  wire.push_back('h');
  wire.push_back('i');
  wire.push_back(0);
  wire.push_back(2);  // two bytes of padding
  const auto p = rtp_parse(wire);
  EXPECT_EQ(p.seq, 7);
  EXPECT_EQ(to_string(p.payload), "hi");
}

TEST(Rtp, StreamInvariantsAcrossWrap) {
  const auto r = webcomm::testing::check_rtp_stream(2000, 4);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Rtp, StreamAdvancesBy160PerAudioFrame) {
  RtpStream s(5, 100, 1000);
  const auto a = s.next(97, {}, 160);
  const auto b = s.next(97, {}, 160);
  EXPECT_EQ(a.timestamp, 1000u);
  EXPECT_EQ(b.timestamp, 1160u);
  EXPECT_EQ(b.seq, 101);
  EXPECT_EQ(s.packets(), 2u);
}

TEST(Rtcp, SenderReportRoundTrip) {
  RtcpSenderReport sr{0x01020304, 0x1122334455667788ULL, 160, 10, 1600};
  const auto wire = rtcp_serialize(sr);
  ASSERT_EQ(wire.size(), 28u);
  EXPECT_EQ(wire[0], 0x80);
  EXPECT_EQ(wire[1], kRtcpSenderReportType);
  EXPECT_EQ((wire[2] << 8) | wire[3], 6);  // length in 32-bit words minus one
  EXPECT_EQ(rtcp_parse_sender_report(wire), sr);
  EXPECT_THROW(rtcp_parse_sender_report(std::span(wire).first(20)), std::invalid_argument);
}

TEST(ToneSource, FiftyFramesPerSecondOf160Samples) {
  ToneSource tone(440);
  for (int i = 0; i < 50; ++i) {
    const auto f = tone.next();
    EXPECT_EQ(f.data.size(), 320u);
    EXPECT_EQ(f.timestamp, static_cast<std::uint32_t>(i * 160));
  }
  EXPECT_EQ(tone.frame_duration() * 50, Millis{1000});
}

TEST(ToneSource, FrameEnergyMatchesClosedForm) {
  const double amplitude = 8000;
  ToneSource tone(440, amplitude);
  const auto f = tone.next();
  double energy = 0;
  for (std::size_t i = 0; i + 1 < f.data.size(); i += 2) {
    const auto s = static_cast<std::int16_t>((f.data[i] << 8) | f.data[i + 1]);
    energy += static_cast<double>(s) * s;
  }
  const double expected = 160 * amplitude * amplitude / 2;
  EXPECT_NEAR(energy, expected, expected * 0.01);
}

TEST(ToneSource, FrequencyBand) {
  EXPECT_THROW(ToneSource(19), std::invalid_argument);
  EXPECT_THROW(ToneSource(3401), std::invalid_argument);
  EXPECT_NO_THROW(ToneSource(20));
  EXPECT_NO_THROW(ToneSource(3400));
}

TEST(PatternSource, HeaderCarriesIndex) {
  PatternSource p(25, 96);
  p.next();
  const auto f = p.next();
  EXPECT_EQ(f.data.size(), 96u);
  EXPECT_EQ(PatternSource::frame_index(f.data), 1u);
  EXPECT_EQ(p.ticks_per_frame(), 3600u);
}

TEST(StatsSink, CountsGaps) {
  StatsSink s;
  s.on_frame(1, 10);
  s.on_frame(2, 10);
  s.on_frame(4, 10);
  const auto snap = s.snapshot();
  EXPECT_EQ(snap.frames, 3u);
  EXPECT_EQ(snap.bytes, 30u);
  EXPECT_EQ(snap.gaps, 1u);
  EXPECT_EQ(snap.last_seq, 4);
}

TEST(StatsSink, WrapIsNotAGap) {
  StatsSink s;
  s.on_frame(65534, 1);
  s.on_frame(65535, 1);
  s.on_frame(0, 1);
  s.on_frame(1, 1);
  EXPECT_EQ(s.snapshot().gaps, 0u);
}

signaling::SessionDescriptor session(std::vector<std::string> supported, std::vector<std::string> preferred) {
  signaling::SessionDescriptor s;
  s.candidates = {{"udp", "127.0.0.1", 40000, 1, "host"}};
  s.codecs_supported = std::move(supported);
  s.codecs_preferred = std::move(preferred);
  return s;
}

TEST(Negotiation, Examples) {
  EXPECT_EQ(negotiate_codecs(session({"tone", "pcm16"}, {"tone", "pcm16"}), session({"pcm16"}, {})),
            std::vector<std::string>{"pcm16"});
  EXPECT_EQ(negotiate_codecs(session({"tone", "pcm16"}, {"pcm16"}), session({"tone", "pcm16"}, {"tone"})),
            (std::vector<std::string>{"pcm16", "tone"}));
  EXPECT_TRUE(negotiate_codecs(session({"tone"}, {}), session({"pcm16"}, {})).empty());
}

TEST(CodecRegistry, DefaultTable) {
  const auto& r = CodecRegistry::defaults();
  EXPECT_EQ(r.by_name("pcm16")->payload_type, 96);
  EXPECT_EQ(r.by_name("tone")->payload_type, 97);
  EXPECT_EQ(r.by_name("pattern")->clock_rate, 90000);
  EXPECT_EQ(r.by_payload_type(98)->name, "pattern");
  EXPECT_FALSE(r.by_name("opus"));
}
