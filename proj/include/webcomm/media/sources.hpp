#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/encoding.hpp"
#include "webcomm/media/codec.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <mutex>
#include <optional>

namespace webcomm::media {

struct MediaFrame {
  MediaKind kind = MediaKind::Audio;
  std::uint64_t index = 0;
  /// Media-clock ticks (8 kHz for audio, 90 kHz for video).
  std::uint32_t timestamp = 0;
  int clock_rate = 8000;
  Bytes data;
};

constexpr int kAudioRate = 8000;
constexpr Millis kAudioFrameDuration{20};
constexpr int kSamplesPerFrame = kAudioRate * 20 / 1000;

/// Synthetic microphone: 20 ms frames of 8 kHz 16-bit mono sine,
/// big-endian samples.
class ToneSource {
 public:
  /// Throws std::invalid_argument unless 20 <= freq_hz <= 3400.
  explicit ToneSource(double freq_hz, double amplitude = 8000.0);

  MediaFrame next();

  void set_amplitude(double amplitude) { amplitude_ = amplitude; }
  double frequency() const { return freq_; }
  double amplitude() const { return amplitude_; }
  Millis frame_duration() const { return kAudioFrameDuration; }
  std::uint32_t ticks_per_frame() const { return kSamplesPerFrame; }

 private:
  double freq_;
  double amplitude_;
  std::uint64_t index_ = 0;
};

/// Synthetic camera: each frame starts with a 16-byte header
/// ("WCPT", big-endian u64 frame index, u32 frame length) followed by a
/// byte pattern derived from the index.
class PatternSource {
 public:
  static constexpr std::size_t kHeaderSize = 16;
  explicit PatternSource(int fps = 25, std::size_t frame_bytes = 96);

  MediaFrame next();

  Millis frame_duration() const { return Millis{1000 / fps_}; }
  std::uint32_t ticks_per_frame() const { return static_cast<std::uint32_t>(90000 / fps_); }

  /// Frame index encoded in a pattern frame header, if it carries one.
  static std::optional<std::uint64_t> frame_index(std::span<const std::uint8_t> data);

 private:
  int fps_;
  std::size_t frame_bytes_;
  std::uint64_t index_ = 0;
};

/// Speaker/display stand-in: counts frames and bytes and detects sequence
/// gaps (missing sequence numbers, 16-bit wrap aware).
class StatsSink {
 public:
  struct Snapshot {
    std::uint64_t frames = 0;
    std::uint64_t bytes = 0;
    std::uint64_t gaps = 0;
    std::optional<std::uint16_t> last_seq;
  };

  void on_frame(std::uint16_t seq, std::size_t bytes);
  Snapshot snapshot() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  Snapshot s_;
};

}  // namespace webcomm::media
