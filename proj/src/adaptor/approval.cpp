#include "webcomm/adaptor/approval.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace webcomm::adaptor {

namespace {

constexpr std::pair<ApprovalKind, std::string_view> kKinds[] = {
    {ApprovalKind::AppConnect, "app-connect"},
    {ApprovalKind::Bind, "bind"},
    {ApprovalKind::SendToNewPeer, "send-to-new-peer"},
    {ApprovalKind::MediaCapture, "media-capture"},
    {ApprovalKind::MediaToClient, "media-to-client"},
};

constexpr std::pair<Decision, std::string_view> kDecisions[] = {
    {Decision::AllowOnce, "allow-once"},
    {Decision::AllowAlways, "allow-always"},
    {Decision::Deny, "deny"},
};

}  // namespace

std::string_view to_string(ApprovalKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string_view to_string(Decision decision) {
  for (const auto& [d, name] : kDecisions) {
    if (d == decision) return name;
  }
  return "unknown";
}

ApprovalKind approval_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKinds) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown approval kind: " + std::string(name));
}

Decision decision_from_string(std::string_view name) {
  if (name == "allow") return Decision::AllowOnce;
  for (const auto& [d, n] : kDecisions) {
    if (n == name) return d;
  }
  throw std::invalid_argument("unknown decision: " + std::string(name));
}

RulePolicy RulePolicy::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("policy document must be an object");
  try {
    const auto fallback = decision_from_string(doc.value("default", std::string("deny")));
    std::vector<Rule> rules;
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
      Rule rule{approval_kind_from_string(r.at("kind").get<std::string>()), std::nullopt, std::nullopt,
                decision_from_string(r.at("decision").get<std::string>())};
      if (r.contains("app")) rule.app_id = r["app"].get<std::string>();
      if (r.contains("subject")) rule.subject = r["subject"].get<std::string>();
      rules.push_back(std::move(rule));
    }
    return RulePolicy(fallback, std::move(rules));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad policy document: ") + e.what());
  }
}

RulePolicy RulePolicy::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open policy file " + path.string());
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::invalid_argument("policy file is not JSON: " + path.string());
  return from_json(doc);
}

Decision RulePolicy::decide(const ApprovalRequest& request) {
  for (const auto& r : rules_) {
    if (r.kind != request.kind) continue;
    if (r.app_id && *r.app_id != request.app_id) continue;
    if (r.subject && *r.subject != request.subject) continue;
    return r.decision;
  }
  return fallback_;
}

Decision ScriptedPolicy::decide(const ApprovalRequest& request) {
  std::lock_guard lock(mu_);
  asked_.push_back(request);
  return script_ ? script_(request) : Decision::AllowOnce;
}

std::vector<ApprovalRequest> ScriptedPolicy::asked() const {
  std::lock_guard lock(mu_);
  return asked_;
}

void ScriptedPolicy::clear() {
  std::lock_guard lock(mu_);
  asked_.clear();
}

Decision PromptPolicy::decide(const ApprovalRequest& request) {
  std::lock_guard lock(mu_);
  out_ << "[adaptor] application '" << request.app_id << "' requests " << to_string(request.kind);
  if (!request.subject.empty()) out_ << " (" << request.subject << ")";
  out_ << ". Allow? [y]es once / [a]lways / [N]o: " << std::flush;
  std::string line;
  if (!std::getline(in_, line)) return Decision::Deny;
  if (line == "y" || line == "Y" || line == "yes") return Decision::AllowOnce;
  if (line == "a" || line == "A" || line == "always") return Decision::AllowAlways;
  return Decision::Deny;
}

}  // namespace webcomm::adaptor
