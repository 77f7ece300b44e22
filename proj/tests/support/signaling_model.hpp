#pragma once

#include "check.hpp"

#include <cstdint>

namespace webcomm::testing {

struct SignalingPropertyStats {
  int sequences = 0;
  long operations = 0;
  long frames = 0;
  long get_checks = 0;
  long put_repeats = 0;
  long delete_repeats = 0;
};

/// Random operation sequences against an in-memory SignalingService,
/// each step checked against a single-threaded reference model: status
/// codes, returned ids, registry contents, and every frame each
/// subscription received (type, seq, resource, payload keys, closure).
/// Every GET must leave state and streams untouched; every successful PUT
/// is repeated and must reproduce the same state; every successful DELETE
/// is repeated and must answer 404 without changing anything.
CheckResult check_signaling_sequences(int sequences, int ops_per_sequence, std::uint64_t seed,
                                      SignalingPropertyStats* stats = nullptr);

}  // namespace webcomm::testing
