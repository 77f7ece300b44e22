#pragma once

#include "webcomm/signaling/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace webcomm::media {

enum class MediaKind { Audio, Video };

struct CodecDescriptor {
  std::string name;
  int clock_rate = 0;
  std::uint8_t payload_type = 0;
  MediaKind kind = MediaKind::Audio;
};

/// Name <-> payload type table. There are no real codecs: pcm16 is raw
/// 16-bit PCM, tone and pattern carry synthetic media.
class CodecRegistry {
 public:
  /// {pcm16/8000 <-> 96, tone/8000 <-> 97, pattern/90000 <-> 98}
  static const CodecRegistry& defaults();

  void add(CodecDescriptor codec);
  std::optional<CodecDescriptor> by_name(const std::string& name) const;
  std::optional<CodecDescriptor> by_payload_type(std::uint8_t pt) const;
  const std::vector<CodecDescriptor>& all() const { return codecs_; }

 private:
  std::vector<CodecDescriptor> codecs_;
};

/// Offerer's preference order: codecs_preferred first, then the rest of
/// codecs_supported.
std::vector<std::string> preference_order(const signaling::SessionDescriptor& session);

/// Codecs both sides support, in the offerer's preference order. Empty
/// means media cannot start.
std::vector<std::string> negotiate_codecs(const signaling::SessionDescriptor& offer,
                                          const signaling::SessionDescriptor& answer);

}  // namespace webcomm::media
