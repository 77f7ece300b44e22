#include "webcomm/media/sources.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace webcomm::media {

ToneSource::ToneSource(double freq_hz, double amplitude) : freq_(freq_hz), amplitude_(amplitude) {
  if (!(freq_hz >= 20.0 && freq_hz <= 3400.0)) throw std::invalid_argument("tone frequency must be in 20..3400 Hz");
}

MediaFrame ToneSource::next() {
  MediaFrame f;
  f.kind = MediaKind::Audio;
  f.index = index_;
  f.clock_rate = kAudioRate;
  f.timestamp = static_cast<std::uint32_t>(index_ * kSamplesPerFrame);
  f.data.reserve(2 * kSamplesPerFrame);
  const double w = 2.0 * std::numbers::pi * freq_ / kAudioRate;
  for (int i = 0; i < kSamplesPerFrame; ++i) {
    const double n = static_cast<double>(index_ * kSamplesPerFrame + static_cast<std::uint64_t>(i));
    const auto s = static_cast<std::int16_t>(std::lround(amplitude_ * std::sin(w * n)));
    const auto u = static_cast<std::uint16_t>(s);
    f.data.push_back(static_cast<std::uint8_t>(u >> 8));
    f.data.push_back(static_cast<std::uint8_t>(u));
  }
  ++index_;
  return f;
}

PatternSource::PatternSource(int fps, std::size_t frame_bytes) : fps_(fps), frame_bytes_(frame_bytes) {
  if (fps < 1 || fps > 60) throw std::invalid_argument("pattern fps must be in 1..60");
  if (frame_bytes < kHeaderSize) throw std::invalid_argument("pattern frame shorter than its header");
}

MediaFrame PatternSource::next() {
  MediaFrame f;
  f.kind = MediaKind::Video;
  f.index = index_;
  f.clock_rate = 90000;
  f.timestamp = static_cast<std::uint32_t>(index_ * ticks_per_frame());
  f.data = {'W', 'C', 'P', 'T'};
  for (int shift = 56; shift >= 0; shift -= 8) f.data.push_back(static_cast<std::uint8_t>(index_ >> shift));
  const auto len = static_cast<std::uint32_t>(frame_bytes_);
  for (int shift = 24; shift >= 0; shift -= 8) f.data.push_back(static_cast<std::uint8_t>(len >> shift));
  for (std::size_t i = kHeaderSize; i < frame_bytes_; ++i) {
    f.data.push_back(static_cast<std::uint8_t>((index_ + i) & 0xFF));
  }
  ++index_;
  return f;
}

std::optional<std::uint64_t> PatternSource::frame_index(std::span<const std::uint8_t> data) {
  if (data.size() < kHeaderSize || data[0] != 'W' || data[1] != 'C' || data[2] != 'P' || data[3] != 'T') {
    return std::nullopt;
  }
  std::uint64_t idx = 0;
  for (int i = 4; i < 12; ++i) idx = (idx << 8) | data[static_cast<std::size_t>(i)];
  return idx;
}

void StatsSink::on_frame(std::uint16_t seq, std::size_t bytes) {
  std::lock_guard lock(mu_);
  ++s_.frames;
  s_.bytes += bytes;
  if (s_.last_seq) {
    const auto delta = static_cast<std::uint16_t>(seq - *s_.last_seq);
    if (delta == 0 || delta >= 0x8000) return;  // duplicate or late packet
    s_.gaps += delta - 1u;
  }
  s_.last_seq = seq;
}

StatsSink::Snapshot StatsSink::snapshot() const {
  std::lock_guard lock(mu_);
  return s_;
}

nlohmann::json StatsSink::to_json() const {
  const auto s = snapshot();
  return {{"frames", s.frames},
          {"bytes", s.bytes},
          {"gaps", s.gaps},
          {"last_seq", s.last_seq ? nlohmann::json(*s.last_seq) : nlohmann::json(nullptr)}};
}

}  // namespace webcomm::media
