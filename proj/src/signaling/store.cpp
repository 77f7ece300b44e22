#include "webcomm/signaling/store.hpp"

#include <stdexcept>
#include <string>

namespace webcomm::signaling {

FileStore::FileStore(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open store file " + path_.string());
}

void FileStore::append(const nlohmann::json& record) {
  std::lock_guard lock(mu_);
  out_ << record.dump() << '\n';
  out_.flush();
}

std::vector<nlohmann::json> FileStore::load() {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> records;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    records.push_back(std::move(j));
  }
  return records;
}

}  // namespace webcomm::signaling
