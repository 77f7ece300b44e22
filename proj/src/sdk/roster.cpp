#include "webcomm/sdk/roster.hpp"

namespace webcomm::sdk {

bool RosterModel::apply(const nlohmann::json& frame) {
  if (frame.value("type", std::string()) != "contact-update" || !frame.contains("payload")) return false;
  const auto& p = frame["payload"];
  const auto resource = frame.value("resource", std::string());
  if (resource.rfind("/login/", 0) != 0) return false;
  const auto aor = resource.substr(7);
  nlohmann::json entry = {{"online", p.value("online", true)}};
  if (p.contains("contact") && p["contact"].contains("presence")) entry["presence"] = p["contact"]["presence"];
  entries_[aor] = std::move(entry);
  ++version_;
  return true;
}

void RosterModel::refresh(const nlohmann::json& login_page) {
  for (auto& [aor, entry] : entries_) entry["online"] = false;
  for (const auto& item : login_page.value("items", nlohmann::json::array())) {
    const auto aor = item.is_string() ? item.get<std::string>() : item.value("aor", std::string());
    entries_[aor]["online"] = true;
  }
  ++version_;
}

bool RosterModel::online(const std::string& aor) const {
  auto it = entries_.find(aor);
  return it != entries_.end() && it->second.value("online", false);
}

}  // namespace webcomm::sdk
