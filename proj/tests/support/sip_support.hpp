#pragma once

#include "check.hpp"

#include "webcomm/core/clock.hpp"
#include "webcomm/core/network.hpp"
#include "webcomm/sip/message.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace webcomm::testing {

struct CorpusEntry {
  std::string name;
  std::string text;
};

/// The hand-built messages under tests/data/sip, sorted by file name.
std::vector<CorpusEntry> load_sip_corpus(const std::filesystem::path& dir);

/// RFC 3261 section 25 grammar, reduced to what the corpus uses: start
/// line, header-field lines (with folding), blank line, body. Returns the
/// method ("" for responses) or nullopt when the text does not match.
std::optional<std::string> rfc3261_start(std::string_view text);

/// parse -> serialize -> parse -> serialize is stable for every entry, and
/// the parser agrees with the grammar about the start line.
CheckResult check_sip_roundtrip(const std::vector<CorpusEntry>& corpus);

/// `count` mutations (byte flips, insertions, deletions, truncations, line
/// shuffles, header duplication) of corpus entries. Parse may succeed or
/// throw ParseError and nothing else; a successful parse must round-trip.
CheckResult check_sip_fuzz(const std::vector<CorpusEntry>& corpus, int count, std::uint64_t seed);

/// Scripted SIP endpoint on a Network: answers REGISTER and INVITE as told
/// and records everything it receives.
class MockSipPeer {
 public:
  enum class Answer { Ok, Unauthorized, Busy, Decline, Silent };

  MockSipPeer(Network& network, Endpoint at);

  Answer register_answer = Answer::Ok;
  Answer invite_answer = Answer::Ok;
  /// Codec names offered in the 200 OK's SDP.
  std::vector<std::string> answer_codecs{"pcm16"};
  int media_port = 50000;

  /// Handles datagrams received since the last call.
  void process();
  void send(const sip::SipMessage& msg, const Endpoint& to);

  const Endpoint& address() const { return at_; }
  std::vector<sip::SipMessage> received() const;
  int count(const std::string& method_or_status) const;
  std::optional<sip::SipMessage> last(const std::string& method_or_status) const;
  /// Responses the peer got, in order.
  std::vector<sip::SipMessage> responses() const;

 private:
  void on_request(const sip::SipMessage& req, const Endpoint& from);

  Endpoint at_;
  std::unique_ptr<DatagramSocket> socket_;
  mutable std::mutex mu_;
  std::deque<std::pair<Endpoint, std::string>> inbox_;
  std::vector<sip::SipMessage> received_;
  int tag_ = 1;
};

/// Scripted gateway flows on the simulator: a web phone, the gateway and
/// a mock peer acting as registrar and next hop.
CheckResult flow_register(MockSipPeer::Answer answer, int want_status, bool want_contact);
CheckResult flow_register_timeout();
CheckResult flow_invite_busy();
CheckResult flow_invite_ok_then_hangup();
CheckResult flow_invite_timeout();
CheckResult flow_incoming_call();
CheckResult flow_incoming_no_common_codec();

}  // namespace webcomm::testing
