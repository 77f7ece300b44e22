#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <vector>

namespace webcomm::signaling {

/// Append-only log of registry mutations. The service replays `load()` at
/// startup to rebuild its state.
class Store {
 public:
  virtual ~Store() = default;
  virtual void append(const nlohmann::json& record) = 0;
  virtual std::vector<nlohmann::json> load() = 0;
};

class MemoryStore final : public Store {
 public:
  void append(const nlohmann::json& record) override {
    std::lock_guard lock(mu_);
    records_.push_back(record);
  }
  std::vector<nlohmann::json> load() override {
    std::lock_guard lock(mu_);
    return records_;
  }

 private:
  std::mutex mu_;
  std::vector<nlohmann::json> records_;
};

/// One JSON object per line. A torn final line (crash mid-write) is skipped.
class FileStore final : public Store {
 public:
  explicit FileStore(std::filesystem::path path);
  void append(const nlohmann::json& record) override;
  std::vector<nlohmann::json> load() override;

 private:
  std::mutex mu_;
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace webcomm::signaling
