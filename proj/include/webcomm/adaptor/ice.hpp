#pragma once

#include "webcomm/core/clock.hpp"
#include "webcomm/core/endpoint.hpp"
#include "webcomm/signaling/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace webcomm::ice {

using signaling::TransportCandidate;

enum class Phase { New, Gathering, Gathered, Checking, Connected, Failed };

std::string_view to_string(Phase phase);
/// new -> gathering -> gathered -> checking -> {connected | failed}
bool is_valid_transition(Phase from, Phase to);

/// local.priority * 65536 + remote.priority
std::uint64_t pair_priority(const TransportCandidate& local, const TransportCandidate& remote);

struct CandidatePair {
  enum class State { Waiting, InProgress, Succeeded, Failed };

  std::size_t component = 0;
  TransportCandidate local;
  TransportCandidate remote;
  std::uint64_t priority = 0;
  State state = State::Waiting;
  std::string failure;
  std::string txid;
  int sends = 0;
  Millis next_send{0};
  Millis deadline{0};
};

std::string_view to_string(CandidatePair::State state);

/// Every local x remote pair of matching kind, highest priority first. Equal
/// priorities order by (local address, remote address), then ports.
std::vector<CandidatePair> form_pairs(const std::vector<TransportCandidate>& locals,
                                      const std::vector<TransportCandidate>& remotes);

/// Connectivity-check datagram: {"t":"ping"|"pong"|"ack","txid":hex}, plus
/// "bind"/"mapped" for reflexive address discovery. At most 128 bytes.
struct CheckMessage {
  std::string type;
  std::string txid;
  std::optional<Endpoint> addr;
};

constexpr std::size_t kMaxCheckSize = 128;

std::string encode_check(const CheckMessage& msg);
/// nullopt for anything that is not a well-formed check datagram.
std::optional<CheckMessage> decode_check(std::span<const std::uint8_t> data);

struct IceTiming {
  Millis retransmit{100};
  int retries = 5;
  Millis pair_timeout{1500};
  Millis gather_timeout{600};
};

/// Host candidate priority for component i; reflexive candidates rank lower.
std::int64_t host_priority(std::size_t component);
std::int64_t srflx_priority(std::size_t component);

/// ICE-lite agent over a fixed set of local UDP sockets ("components").
///
/// All pairs are checked in parallel; ping retransmits every `retransmit`
/// up to `retries` times and a pair fails once `pair_timeout` passes. The
/// answering side learns a working path when its pong is acknowledged, which
/// yields a peer-reflexive pair when the ping arrived from an address it was
/// not told about. The selected pair is the highest-priority succeeded pair,
/// chosen once no higher-priority pair is still pending.
class IceAgent {
 public:
  class Io {
   public:
    virtual ~Io() = default;
    /// Returns false (and sends nothing) when sending to `to` is not allowed.
    virtual bool send(std::size_t component, const Endpoint& to, std::string_view bytes) = 0;
  };

  IceAgent(std::vector<Endpoint> components, std::optional<Endpoint> reflector,
           std::function<std::string()> new_txid, IceTiming timing = {});

  /// Throws ApiError(409) unless phase is new.
  void gather(Millis now, Io& io);
  /// Throws ApiError(409) outside new/gathering/gathered, 400 on empty list.
  void set_remote_candidates(std::vector<TransportCandidate> remotes);
  /// Throws ApiError(409) unless gathered with remote candidates set.
  void start_checks(Millis now, Io& io);
  /// True when the datagram was a check message and has been consumed.
  bool on_datagram(std::size_t component, const Endpoint& from, std::span<const std::uint8_t> data, Millis now,
                   Io& io);
  void advance(Millis now, Io& io);

  Phase phase() const { return phase_; }
  /// Phase changes since the last call, in order.
  std::vector<Phase> take_phase_changes();
  const std::vector<TransportCandidate>& local_candidates() const { return locals_; }
  const std::vector<TransportCandidate>& remote_candidates() const { return remotes_; }
  const std::vector<CandidatePair>& pairs() const { return pairs_; }
  const std::optional<CandidatePair>& selected() const { return selected_; }
  const std::vector<Endpoint>& components() const { return components_; }

  nlohmann::json to_json() const;
  nlohmann::json failures_json() const;

 private:
  struct GatherState {
    std::string txid;
    int sends = 0;
    Millis next_send{0};
    bool done = false;
  };
  struct Validated {
    std::size_t component;
    Endpoint remote;
  };

  void set_phase(Phase next);
  void finish_gathering_if_done(Millis now);
  void mark_validated(std::size_t component, const Endpoint& remote);
  void evaluate();

  std::vector<Endpoint> components_;
  std::optional<Endpoint> reflector_;
  std::function<std::string()> new_txid_;
  IceTiming timing_;

  Phase phase_ = Phase::New;
  std::vector<Phase> changes_;
  std::vector<TransportCandidate> host_candidates_;
  std::vector<TransportCandidate> locals_;
  std::vector<TransportCandidate> remotes_;
  std::vector<CandidatePair> pairs_;
  std::optional<CandidatePair> selected_;
  std::vector<GatherState> gathering_;
  Millis gather_deadline_{0};
  std::map<std::string, Validated> answered_;
  std::vector<Validated> early_validated_;
};

}  // namespace webcomm::ice
