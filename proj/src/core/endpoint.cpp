#include "webcomm/core/endpoint.hpp"

#include <arpa/inet.h>

#include <charconv>

namespace webcomm {

bool is_ipv4_literal(std::string_view text) {
  in_addr addr{};
  const std::string s(text);
  return inet_pton(AF_INET, s.c_str(), &addr) == 1;
}

std::optional<Endpoint> Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto host = text.substr(0, colon);
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) return std::nullopt;
  if (!is_ipv4_literal(host)) return std::nullopt;
  return Endpoint{std::string(host), static_cast<std::uint16_t>(port)};
}

}  // namespace webcomm
