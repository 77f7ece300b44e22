#include "webcomm/sip/message.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

namespace webcomm::sip {
namespace {

struct KnownHeader {
  std::string_view name;
  char compact;
};

constexpr std::array<KnownHeader, 22> kKnown{{
    {"Accept", 0},         {"Allow", 0},         {"Call-ID", 'i'},       {"Contact", 'm'},
    {"Content-Encoding", 'e'}, {"Content-Length", 'l'}, {"Content-Type", 'c'}, {"CSeq", 0},
    {"Expires", 0},        {"From", 'f'},        {"Max-Forwards", 0},    {"Record-Route", 0},
    {"Require", 0},        {"Route", 0},         {"Server", 0},          {"Subject", 's'},
    {"Supported", 'k'},    {"To", 't'},          {"User-Agent", 0},      {"Via", 'v'},
    {"WWW-Authenticate", 0}, {"Authorization", 0},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_token_char(char c) {
  if (std::isalnum(static_cast<unsigned char>(c))) return true;
  switch (c) {
    case '-': case '.': case '!': case '%': case '*': case '_': case '+': case '`': case '\'': case '~':
      return true;
    default:
      return false;
  }
}

bool is_token(std::string_view s) { return !s.empty() && std::all_of(s.begin(), s.end(), is_token_char); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  if (s.empty() || s.size() > 10) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_lines(std::string_view head) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= head.size()) {
    auto nl = head.find('\n', pos);
    auto line = head.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

void parse_start_line(std::string_view line, SipMessage& msg) {
  if (std::any_of(line.begin(), line.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20 && c != '\t'; })) {
    throw ParseError(ParseErrorKind::BadStartLine, "control character");
  }
  if (line.rfind("SIP/", 0) == 0) {
    // SIP/2.0 SP status SP reason
    auto sp1 = line.find(' ');
    if (sp1 == std::string_view::npos || line.substr(0, sp1) != "SIP/2.0") {
      throw ParseError(ParseErrorKind::BadStartLine, "bad status line version");
    }
    auto rest = line.substr(sp1 + 1);
    const auto sp_it = std::find(rest.begin(), rest.end(), ' ');
    const auto sp2 = sp_it == rest.end() ? std::string_view::npos : static_cast<std::size_t>(sp_it - rest.begin());
    auto code = rest.substr(0, sp2);
    auto status = code.size() == 3 ? parse_number<int>(code) : std::nullopt;
    if (!status || *status < 100 || *status > 699) throw ParseError(ParseErrorKind::BadStartLine, "bad status code");
    msg.is_request = false;
    msg.status = *status;
    msg.reason = sp2 == std::string_view::npos ? "" : std::string(rest.substr(sp2 + 1));
    return;
  }
  auto sp1 = line.find(' ');
  auto sp2 = sp1 == std::string_view::npos ? sp1 : line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos || line.find(' ', sp2 + 1) != std::string_view::npos) {
    throw ParseError(ParseErrorKind::BadStartLine, "request line needs method, uri and version");
  }
  auto method = line.substr(0, sp1);
  auto uri = line.substr(sp1 + 1, sp2 - sp1 - 1);
  auto version = line.substr(sp2 + 1);
  if (!is_token(method)) throw ParseError(ParseErrorKind::BadStartLine, "bad method");
  if (uri.empty() || uri.find(':') == std::string_view::npos) throw ParseError(ParseErrorKind::BadStartLine, "bad uri");
  if (version != "SIP/2.0") throw ParseError(ParseErrorKind::BadStartLine, "bad version");
  msg.is_request = true;
  msg.method = std::string(method);
  msg.uri = std::string(uri);
}

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::TooLarge: return "too-large";
    case ParseErrorKind::MissingTerminator: return "missing-terminator";
    case ParseErrorKind::BadStartLine: return "bad-start-line";
    case ParseErrorKind::BadHeader: return "bad-header";
    case ParseErrorKind::MissingHeader: return "missing-header";
    case ParseErrorKind::BadCSeq: return "bad-cseq";
    case ParseErrorKind::BadContentLength: return "bad-content-length";
    case ParseErrorKind::ContentLengthMismatch: return "content-length-mismatch";
  }
  return "unknown";
}

std::string canonical_header_name(std::string_view name) {
  for (const auto& k : kKnown) {
    if (iequals(name, k.name)) return std::string(k.name);
    if (k.compact && name.size() == 1 &&
        std::tolower(static_cast<unsigned char>(name[0])) == k.compact) {
      return std::string(k.name);
    }
  }
  return std::string(name);
}

SipMessage SipMessage::request(std::string method, std::string uri) {
  SipMessage m;
  m.is_request = true;
  m.method = std::move(method);
  m.uri = std::move(uri);
  return m;
}

SipMessage SipMessage::response(int status, std::string reason) {
  SipMessage m;
  m.is_request = false;
  m.status = status;
  m.reason = reason.empty() ? reason_phrase(status) : std::move(reason);
  return m;
}

std::optional<std::string> SipMessage::header(std::string_view name) const {
  const auto canon = canonical_header_name(name);
  for (const auto& h : headers) {
    if (iequals(h.name, canon)) return h.value;
  }
  return std::nullopt;
}

std::vector<std::string> SipMessage::headers_named(std::string_view name) const {
  const auto canon = canonical_header_name(name);
  std::vector<std::string> out;
  for (const auto& h : headers) {
    if (iequals(h.name, canon)) out.push_back(h.value);
  }
  return out;
}

void SipMessage::set_header(std::string_view name, std::string value) {
  const auto canon = canonical_header_name(name);
  for (auto& h : headers) {
    if (iequals(h.name, canon)) {
      h.value = std::move(value);
      return;
    }
  }
  headers.push_back({canon, std::move(value)});
}

void SipMessage::add_header(std::string_view name, std::string value) {
  headers.push_back({canonical_header_name(name), std::move(value)});
}

void SipMessage::remove_header(std::string_view name) {
  const auto canon = canonical_header_name(name);
  headers.erase(std::remove_if(headers.begin(), headers.end(), [&](const Header& h) { return iequals(h.name, canon); }),
                headers.end());
}

std::optional<std::pair<std::uint32_t, std::string>> SipMessage::cseq() const {
  auto v = header("CSeq");
  if (!v) return std::nullopt;
  std::string_view s = trim(*v);
  auto sp = s.find_first_of(" \t");
  if (sp == std::string_view::npos) return std::nullopt;
  auto num = parse_number<std::uint32_t>(s.substr(0, sp));
  auto method = trim(s.substr(sp + 1));
  if (!num || !is_token(method)) return std::nullopt;
  return std::make_pair(*num, std::string(method));
}

std::string SipMessage::branch() const {
  auto via = header("Via");
  return via ? header_param(*via, "branch") : std::string();
}

SipMessage parse(std::string_view data) {
  if (data.size() > kMaxMessageSize) throw ParseError(ParseErrorKind::TooLarge, std::to_string(data.size()) + " bytes");
  std::size_t head_end = data.find("\r\n\r\n");
  std::size_t body_start = head_end == std::string_view::npos ? head_end : head_end + 4;
  if (head_end == std::string_view::npos) {
    head_end = data.find("\n\n");
    if (head_end == std::string_view::npos) throw ParseError(ParseErrorKind::MissingTerminator, "no empty line after headers");
    body_start = head_end + 2;
  }
  const auto lines = split_lines(data.substr(0, head_end));
  if (lines.empty() || lines.front().empty()) throw ParseError(ParseErrorKind::BadStartLine, "empty start line");

  SipMessage msg;
  parse_start_line(lines.front(), msg);

  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = lines[i];
    if (std::any_of(line.begin(), line.end(),
                    [](char c) { return static_cast<unsigned char>(c) < 0x20 && c != '\t'; })) {
      throw ParseError(ParseErrorKind::BadHeader, "control character in header");
    }
    if (!line.empty() && (line.front() == ' ' || line.front() == '\t')) {
      if (msg.headers.empty()) throw ParseError(ParseErrorKind::BadHeader, "continuation before first header");
      auto more = trim(line);
      auto& value = msg.headers.back().value;
      if (!more.empty()) value += (value.empty() ? "" : " ") + std::string(more);
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError(ParseErrorKind::BadHeader, "header without colon");
    auto name = trim(line.substr(0, colon));
    if (!is_token(name)) throw ParseError(ParseErrorKind::BadHeader, "bad header name");
    msg.headers.push_back({canonical_header_name(name), std::string(trim(line.substr(colon + 1)))});
  }

  for (const char* required : {"Via", "From", "To", "Call-ID", "CSeq"}) {
    if (!msg.header(required)) throw ParseError(ParseErrorKind::MissingHeader, required);
  }
  if (msg.is_request && (msg.method == "REGISTER" || msg.method == "INVITE") && !msg.header("Contact")) {
    throw ParseError(ParseErrorKind::MissingHeader, "Contact");
  }
  if (msg.call_id().empty()) throw ParseError(ParseErrorKind::BadHeader, "empty Call-ID");
  auto cseq = msg.cseq();
  if (!cseq) throw ParseError(ParseErrorKind::BadCSeq, "malformed CSeq");
  if (msg.is_request && cseq->second != msg.method && !(msg.method == "ACK" && cseq->second == "ACK")) {
    throw ParseError(ParseErrorKind::BadCSeq, "CSeq method differs from request method");
  }

  std::string_view body = body_start <= data.size() ? data.substr(body_start) : std::string_view{};
  const auto lengths = msg.headers_named("Content-Length");
  if (!lengths.empty()) {
    std::optional<std::size_t> declared;
    for (const auto& l : lengths) {
      auto n = parse_number<std::size_t>(trim(l));
      if (!n || (declared && *declared != *n)) throw ParseError(ParseErrorKind::BadContentLength, l);
      declared = n;
    }
    if (*declared > body.size()) {
      throw ParseError(ParseErrorKind::ContentLengthMismatch,
                       "declared " + std::to_string(*declared) + ", got " + std::to_string(body.size()));
    }
    body = body.substr(0, *declared);
  }
  msg.body = std::string(body);
  return msg;
}

std::string serialize(const SipMessage& msg) {
  std::string out;
  if (msg.is_request) {
    out = msg.method + " " + msg.uri + " SIP/2.0\r\n";
  } else {
    out = "SIP/2.0 " + std::to_string(msg.status) + " " + msg.reason + "\r\n";
  }
  bool have_length = false;
  for (const auto& h : msg.headers) {
    if (h.name == "Content-Length") {
      if (have_length) continue;
      have_length = true;
      out += "Content-Length: " + std::to_string(msg.body.size()) + "\r\n";
      continue;
    }
    out += h.name + ": " + h.value + "\r\n";
  }
  if (!have_length) out += "Content-Length: " + std::to_string(msg.body.size()) + "\r\n";
  out += "\r\n";
  out += msg.body;
  return out;
}

std::string reason_phrase(int status) {
  switch (status) {
    case 100: return "Trying";
    case 180: return "Ringing";
    case 200: return "OK";
    case 400: return "Bad Request";
    case 401: return "Unauthorized";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 408: return "Request Timeout";
    case 480: return "Temporarily Unavailable";
    case 481: return "Call/Transaction Does Not Exist";
    case 486: return "Busy Here";
    case 487: return "Request Terminated";
    case 488: return "Not Acceptable Here";
    case 500: return "Server Internal Error";
    case 501: return "Not Implemented";
    case 503: return "Service Unavailable";
    case 603: return "Decline";
    default: return status < 300 ? "OK" : "Error";
  }
}

std::string header_param(std::string_view value, std::string_view name) {
  // Parameters after the closing '>' when there is one.
  auto gt = value.find('>');
  std::size_t pos = gt == std::string_view::npos ? 0 : gt + 1;
  while ((pos = value.find(';', pos)) != std::string_view::npos) {
    ++pos;
    auto end = value.find_first_of(";,", pos);
    auto param = trim(value.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    auto eq = param.find('=');
    if (iequals(trim(param.substr(0, eq)), name)) {
      return eq == std::string_view::npos ? std::string() : std::string(trim(param.substr(eq + 1)));
    }
    if (end == std::string_view::npos || value[end] == ',') break;
  }
  return {};
}

std::string tag_param(std::string_view name_addr) { return header_param(name_addr, "tag"); }

std::string uri_of(std::string_view name_addr) {
  auto lt = name_addr.find('<');
  if (lt != std::string_view::npos) {
    auto gt = name_addr.find('>', lt);
    if (gt == std::string_view::npos) return std::string(trim(name_addr.substr(lt + 1)));
    return std::string(trim(name_addr.substr(lt + 1, gt - lt - 1)));
  }
  auto s = trim(name_addr);
  return std::string(s.substr(0, s.find(';')));
}

std::string aor_of(std::string_view uri) {
  auto s = trim(uri);
  if (auto colon = s.find(':'); colon != std::string_view::npos && (s.rfind("sip:", 0) == 0 || s.rfind("sips:", 0) == 0)) {
    s.remove_prefix(colon + 1);
  }
  s = s.substr(0, s.find_first_of(";?>"));
  auto at = s.find('@');
  auto port_colon = s.find(':', at == std::string_view::npos ? 0 : at);
  if (port_colon != std::string_view::npos) s = s.substr(0, port_colon);
  return std::string(s);
}

}  // namespace webcomm::sip
