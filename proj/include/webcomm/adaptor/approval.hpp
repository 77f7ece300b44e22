#pragma once

#include <nlohmann/json.hpp>

#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace webcomm::adaptor {

enum class ApprovalKind { AppConnect, Bind, SendToNewPeer, MediaCapture, MediaToClient };
enum class Decision { AllowOnce, AllowAlways, Deny };

std::string_view to_string(ApprovalKind kind);
std::string_view to_string(Decision decision);
/// Throws std::invalid_argument on an unknown name.
ApprovalKind approval_kind_from_string(std::string_view name);
Decision decision_from_string(std::string_view name);

struct ApprovalRequest {
  ApprovalKind kind = ApprovalKind::AppConnect;
  std::string app_id;
  /// What is being approved: the destination address for sends, the
  /// device class for capture, empty when the kind alone says it all.
  std::string subject;
};

/// Stand-in for the user's consent dialog.
class ApprovalPolicy {
 public:
  virtual ~ApprovalPolicy() = default;
  virtual Decision decide(const ApprovalRequest& request) = 0;
};

/// Same answer to everything.
class StaticPolicy final : public ApprovalPolicy {
 public:
  explicit StaticPolicy(Decision decision) : decision_(decision) {}
  Decision decide(const ApprovalRequest&) override { return decision_; }

 private:
  Decision decision_;
};

/// Per-kind rules with a default, optionally narrowed by subject:
/// {"default":"deny","rules":[{"kind":"bind","decision":"allow-once"},
///  {"kind":"send-to-new-peer","subject":"10.0.0.9","decision":"deny"}]}.
/// The first matching rule wins.
class RulePolicy final : public ApprovalPolicy {
 public:
  struct Rule {
    ApprovalKind kind;
    std::optional<std::string> app_id;
    std::optional<std::string> subject;
    Decision decision;
  };

  explicit RulePolicy(Decision fallback, std::vector<Rule> rules = {})
      : fallback_(fallback), rules_(std::move(rules)) {}

  /// Throws std::invalid_argument on a malformed document.
  static RulePolicy from_json(const nlohmann::json& doc);
  static RulePolicy from_file(const std::filesystem::path& path);

  Decision decide(const ApprovalRequest& request) override;

 private:
  Decision fallback_;
  std::vector<Rule> rules_;
};

/// Test policy: answers from a callback (default allow-once) and records
/// every request it was asked.
class ScriptedPolicy final : public ApprovalPolicy {
 public:
  using Script = std::function<Decision(const ApprovalRequest&)>;

  ScriptedPolicy() = default;
  explicit ScriptedPolicy(Script script) : script_(std::move(script)) {}

  Decision decide(const ApprovalRequest& request) override;
  std::vector<ApprovalRequest> asked() const;
  void clear();

 private:
  mutable std::mutex mu_;
  Script script_;
  std::vector<ApprovalRequest> asked_;
};

/// Interactive terminal prompt. Reads one answer line per request:
/// "y" allow once, "a" always, anything else denies.
class PromptPolicy final : public ApprovalPolicy {
 public:
  PromptPolicy(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  Decision decide(const ApprovalRequest& request) override;

 private:
  std::mutex mu_;
  std::istream& in_;
  std::ostream& out_;
};

}  // namespace webcomm::adaptor
