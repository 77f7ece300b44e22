#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace webcomm {

/// IPv4 transport address.
struct Endpoint {
  std::string address;
  std::uint16_t port = 0;

  std::string to_string() const { return address + ":" + std::to_string(port); }
  /// Parses "a.b.c.d:port"; nullopt on anything else.
  static std::optional<Endpoint> parse(std::string_view text);

  auto operator<=>(const Endpoint&) const = default;
};

bool is_ipv4_literal(std::string_view text);

}  // namespace webcomm
