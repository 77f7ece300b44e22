#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>

namespace webcomm::sdk {

/// Contact-list model: last known presence per aor.
class RosterModel {
 public:
  /// Applies a contact-update event frame; other frames are ignored.
  /// Returns true when the roster changed.
  bool apply(const nlohmann::json& frame);
  /// Replaces the online set with a GET /login page.
  void refresh(const nlohmann::json& login_page);

  const std::map<std::string, nlohmann::json>& entries() const { return entries_; }
  bool online(const std::string& aor) const;
  std::uint64_t version() const { return version_; }

 private:
  std::map<std::string, nlohmann::json> entries_;
  std::uint64_t version_ = 0;
};

}  // namespace webcomm::sdk
