#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace webcomm {

/// Milliseconds since the Unix epoch (or since an arbitrary origin for
/// simulated clocks).
using Millis = std::chrono::milliseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Millis now() const override {
    return std::chrono::duration_cast<Millis>(
        std::chrono::system_clock::now().time_since_epoch());
  }
};

/// Clock advanced explicitly by tests and by the simulator.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Millis start = Millis{1'700'000'000'000}) : now_(start.count()) {}

  Millis now() const override { return Millis{now_.load()}; }
  void advance(Millis delta) { now_.fetch_add(delta.count()); }
  void set(Millis t) { now_.store(t.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

inline double to_seconds(Millis t) { return static_cast<double>(t.count()) / 1000.0; }

}  // namespace webcomm
