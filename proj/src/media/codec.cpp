#include "webcomm/media/codec.hpp"

#include <algorithm>

namespace webcomm::media {

const CodecRegistry& CodecRegistry::defaults() {
  static const CodecRegistry registry = [] {
    CodecRegistry r;
    r.add({"pcm16", 8000, 96, MediaKind::Audio});
    r.add({"tone", 8000, 97, MediaKind::Audio});
    r.add({"pattern", 90000, 98, MediaKind::Video});
    return r;
  }();
  return registry;
}

void CodecRegistry::add(CodecDescriptor codec) { codecs_.push_back(std::move(codec)); }

std::optional<CodecDescriptor> CodecRegistry::by_name(const std::string& name) const {
  for (const auto& c : codecs_) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

std::optional<CodecDescriptor> CodecRegistry::by_payload_type(std::uint8_t pt) const {
  for (const auto& c : codecs_) {
    if (c.payload_type == pt) return c;
  }
  return std::nullopt;
}

std::vector<std::string> preference_order(const signaling::SessionDescriptor& session) {
  std::vector<std::string> order = session.codecs_preferred;
  for (const auto& c : session.codecs_supported) {
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  }
  return order;
}

std::vector<std::string> negotiate_codecs(const signaling::SessionDescriptor& offer,
                                          const signaling::SessionDescriptor& answer) {
  std::vector<std::string> common;
  for (const auto& c : preference_order(offer)) {
    const auto& theirs = answer.codecs_supported;
    if (std::find(theirs.begin(), theirs.end(), c) != theirs.end()) common.push_back(c);
  }
  return common;
}

}  // namespace webcomm::media
