#include "webcomm/sip/dialog.hpp"

namespace webcomm::sip {

std::string_view to_string(DialogState s) {
  switch (s) {
    case DialogState::Early: return "early";
    case DialogState::Confirmed: return "confirmed";
    case DialogState::Terminated: return "terminated";
  }
  return "unknown";
}

Dialog::Dialog(std::string call_id, std::string local_uri, std::string local_tag, std::string remote_uri,
               std::string remote_target, std::uint32_t first_cseq)
    : call_id_(std::move(call_id)),
      local_uri_(std::move(local_uri)),
      local_tag_(std::move(local_tag)),
      remote_uri_(std::move(remote_uri)),
      remote_target_(std::move(remote_target)),
      local_cseq_(first_cseq == 0 ? 0 : first_cseq - 1) {}

void Dialog::confirm(const std::string& remote_tag) {
  if (state_ != DialogState::Early) return;
  if (!remote_tag.empty()) remote_tag_ = remote_tag;
  state_ = DialogState::Confirmed;
}

std::uint32_t Dialog::next_cseq() {
  if (state_ == DialogState::Terminated) throw DialogClosed("dialog " + call_id_ + " is terminated");
  return ++local_cseq_;
}

bool Dialog::accept_remote_cseq(std::uint32_t n) {
  if (remote_cseq_ && n <= *remote_cseq_) return false;
  remote_cseq_ = n;
  return true;
}

SipMessage Dialog::make_request(const std::string& method, std::uint32_t cseq, const std::string& via_sent_by,
                                const std::string& branch) const {
  if (state_ == DialogState::Terminated) throw DialogClosed("dialog " + call_id_ + " is terminated");
  auto msg = SipMessage::request(method, remote_target_.empty() ? remote_uri_ : remote_target_);
  msg.add_header("Via", "SIP/2.0/UDP " + via_sent_by + ";branch=" + branch);
  msg.add_header("Max-Forwards", "70");
  msg.add_header("From", "<" + local_uri_ + ">;tag=" + local_tag_);
  msg.add_header("To", "<" + remote_uri_ + ">" + (remote_tag_.empty() ? "" : ";tag=" + remote_tag_));
  msg.add_header("Call-ID", call_id_);
  msg.add_header("CSeq", std::to_string(cseq) + " " + method);
  return msg;
}

}  // namespace webcomm::sip
