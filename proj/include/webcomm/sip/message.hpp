#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace webcomm::sip {

enum class ParseErrorKind {
  TooLarge,
  MissingTerminator,
  BadStartLine,
  BadHeader,
  MissingHeader,
  BadCSeq,
  BadContentLength,
  ContentLengthMismatch,
};

std::string_view to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

struct Header {
  std::string name;
  std::string value;
  bool operator==(const Header&) const = default;
};

constexpr std::size_t kMaxMessageSize = 65535;

/// A SIP request or response. Header names of well-known headers are held
/// in their canonical long form; any other header keeps its name as
/// received. Order is preserved.
struct SipMessage {
  bool is_request = true;
  std::string method;
  std::string uri;
  int status = 0;
  std::string reason;
  std::vector<Header> headers;
  std::string body;

  static SipMessage request(std::string method, std::string uri);
  static SipMessage response(int status, std::string reason);

  /// First value, case-insensitive, compact forms accepted.
  std::optional<std::string> header(std::string_view name) const;
  std::vector<std::string> headers_named(std::string_view name) const;
  /// Replaces the first occurrence or appends.
  void set_header(std::string_view name, std::string value);
  void add_header(std::string_view name, std::string value);
  void remove_header(std::string_view name);

  std::string call_id() const { return header("Call-ID").value_or(""); }
  /// (number, method) from CSeq; nullopt when absent or malformed.
  std::optional<std::pair<std::uint32_t, std::string>> cseq() const;
  /// Top Via branch parameter, or empty.
  std::string branch() const;

  bool operator==(const SipMessage&) const = default;
};

/// Canonical spelling for well-known headers (compact forms expanded);
/// anything else is returned unchanged.
std::string canonical_header_name(std::string_view name);

/// Parses one datagram. Throws ParseError.
SipMessage parse(std::string_view data);
/// CRLF line endings, Content-Length set to the body size.
std::string serialize(const SipMessage& msg);

std::string reason_phrase(int status);

/// "<sip:bob@x>;tag=1" -> "1"; empty when absent.
std::string tag_param(std::string_view name_addr);
/// Value of `;name=value` in a header value, or empty.
std::string header_param(std::string_view value, std::string_view name);
/// "Bob <sip:bob@x>;tag=1" -> "sip:bob@x".
std::string uri_of(std::string_view name_addr);
/// "sip:bob@example.net:5070;transport=udp" -> "bob@example.net".
std::string aor_of(std::string_view uri);

}  // namespace webcomm::sip
