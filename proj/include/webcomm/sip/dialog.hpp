#pragma once

#include "webcomm/sip/message.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace webcomm::sip {

enum class DialogState { Early, Confirmed, Terminated };

std::string_view to_string(DialogState s);

/// Thrown when asked to send inside a terminated dialog.
class DialogClosed : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One side of an INVITE dialog: identifiers, CSeq counters and state.
/// The route set is always empty.
class Dialog {
 public:
  Dialog(std::string call_id, std::string local_uri, std::string local_tag, std::string remote_uri,
         std::string remote_target, std::uint32_t first_cseq = 1);

  DialogState state() const { return state_; }
  const std::string& call_id() const { return call_id_; }
  const std::string& local_uri() const { return local_uri_; }
  const std::string& local_tag() const { return local_tag_; }
  const std::string& remote_uri() const { return remote_uri_; }
  const std::string& remote_tag() const { return remote_tag_; }
  const std::string& remote_target() const { return remote_target_; }
  std::uint32_t local_cseq() const { return local_cseq_; }
  std::optional<std::uint32_t> remote_cseq() const { return remote_cseq_; }

  /// Early -> confirmed with the peer's tag; a no-op once confirmed.
  void confirm(const std::string& remote_tag);
  void set_remote_tag(const std::string& tag) { remote_tag_ = tag; }
  void set_remote_target(const std::string& target) { remote_target_ = target; }
  void terminate() { state_ = DialogState::Terminated; }

  /// Next CSeq for a new request. Throws DialogClosed once terminated.
  std::uint32_t next_cseq();
  /// False (request to be rejected) unless `n` exceeds every earlier one.
  bool accept_remote_cseq(std::uint32_t n);

  /// In-dialog request with From/To/Call-ID/CSeq/Max-Forwards filled in and
  /// a single Via. ACK and CANCEL reuse `cseq`; other methods pass
  /// next_cseq(). Throws DialogClosed once terminated.
  SipMessage make_request(const std::string& method, std::uint32_t cseq, const std::string& via_sent_by,
                          const std::string& branch) const;

 private:
  std::string call_id_;
  std::string local_uri_;
  std::string local_tag_;
  std::string remote_uri_;
  std::string remote_tag_;
  std::string remote_target_;
  std::uint32_t local_cseq_;
  std::optional<std::uint32_t> remote_cseq_;
  DialogState state_ = DialogState::Early;
};

}  // namespace webcomm::sip
