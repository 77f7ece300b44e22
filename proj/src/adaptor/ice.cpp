#include "webcomm/adaptor/ice.hpp"

#include "webcomm/core/error.hpp"

#include <algorithm>
#include <tuple>

namespace webcomm::ice {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::New: return "new";
    case Phase::Gathering: return "gathering";
    case Phase::Gathered: return "gathered";
    case Phase::Checking: return "checking";
    case Phase::Connected: return "connected";
    case Phase::Failed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(CandidatePair::State state) {
  switch (state) {
    case CandidatePair::State::Waiting: return "waiting";
    case CandidatePair::State::InProgress: return "in-progress";
    case CandidatePair::State::Succeeded: return "succeeded";
    case CandidatePair::State::Failed: return "failed";
  }
  return "unknown";
}

bool is_valid_transition(Phase from, Phase to) {
  switch (from) {
    case Phase::New: return to == Phase::Gathering;
    case Phase::Gathering: return to == Phase::Gathered;
    case Phase::Gathered: return to == Phase::Checking;
    case Phase::Checking: return to == Phase::Connected || to == Phase::Failed;
    case Phase::Connected:
    case Phase::Failed: return false;
  }
  return false;
}

std::uint64_t pair_priority(const TransportCandidate& local, const TransportCandidate& remote) {
  return static_cast<std::uint64_t>(local.priority) * 65536u + static_cast<std::uint64_t>(remote.priority);
}

std::int64_t host_priority(std::size_t component) { return 126'000 + 999 - static_cast<std::int64_t>(component); }

std::int64_t srflx_priority(std::size_t component) { return 100'000 + 999 - static_cast<std::int64_t>(component); }

std::vector<CandidatePair> form_pairs(const std::vector<TransportCandidate>& locals,
                                      const std::vector<TransportCandidate>& remotes) {
  std::vector<CandidatePair> pairs;
  for (std::size_t i = 0; i < locals.size(); ++i) {
    for (const auto& r : remotes) {
      if (locals[i].kind != r.kind) continue;
      CandidatePair p;
      p.component = i;
      p.local = locals[i];
      p.remote = r;
      p.priority = pair_priority(locals[i], r);
      pairs.push_back(std::move(p));
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const CandidatePair& a, const CandidatePair& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    return std::tie(a.local.address, a.remote.address, a.local.port, a.remote.port) <
           std::tie(b.local.address, b.remote.address, b.local.port, b.remote.port);
  });
  return pairs;
}

std::string encode_check(const CheckMessage& msg) {
  nlohmann::json j = {{"t", msg.type}, {"txid", msg.txid}};
  if (msg.addr) j["addr"] = msg.addr->to_string();
  return j.dump();
}

std::optional<CheckMessage> decode_check(std::span<const std::uint8_t> data) {
  if (data.empty() || data.size() > kMaxCheckSize || data[0] != '{') return std::nullopt;
  auto j = nlohmann::json::parse(data.begin(), data.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("t") || !j["t"].is_string() || !j.contains("txid") || !j["txid"].is_string()) return std::nullopt;
  CheckMessage msg{j["t"].get<std::string>(), j["txid"].get<std::string>(), std::nullopt};
  static constexpr std::string_view kTypes[] = {"ping", "pong", "ack", "bind", "mapped"};
  if (std::find(std::begin(kTypes), std::end(kTypes), msg.type) == std::end(kTypes)) return std::nullopt;
  if (j.contains("addr") && j["addr"].is_string()) msg.addr = Endpoint::parse(j["addr"].get<std::string>());
  if (msg.type == "mapped" && !msg.addr) return std::nullopt;
  return msg;
}

IceAgent::IceAgent(std::vector<Endpoint> components, std::optional<Endpoint> reflector,
                   std::function<std::string()> new_txid, IceTiming timing)
    : components_(std::move(components)),
      reflector_(std::move(reflector)),
      new_txid_(std::move(new_txid)),
      timing_(timing) {
  for (std::size_t i = 0; i < components_.size(); ++i) {
    host_candidates_.push_back({"udp", components_[i].address, components_[i].port, host_priority(i), "host"});
  }
}

void IceAgent::set_phase(Phase next) {
  if (!is_valid_transition(phase_, next)) {
    throw ApiError(500, "invalid ICE transition " + std::string(to_string(phase_)) + " -> " +
                            std::string(to_string(next)));
  }
  phase_ = next;
  changes_.push_back(next);
}

std::vector<Phase> IceAgent::take_phase_changes() {
  std::vector<Phase> out;
  out.swap(changes_);
  return out;
}

void IceAgent::gather(Millis now, Io& io) {
  if (phase_ != Phase::New) fail(409, "gather is only valid in phase new");
  set_phase(Phase::Gathering);
  locals_ = host_candidates_;
  if (reflector_) {
    gathering_.resize(components_.size());
    for (auto& g : gathering_) {
      g.txid = new_txid_();
      g.next_send = now;
    }
    gather_deadline_ = now + timing_.gather_timeout;
    advance(now, io);
  } else {
    finish_gathering_if_done(now);
  }
}

void IceAgent::finish_gathering_if_done(Millis now) {
  if (phase_ != Phase::Gathering) return;
  const bool all_done = std::all_of(gathering_.begin(), gathering_.end(), [](const auto& g) { return g.done; });
  if (all_done || now >= gather_deadline_) set_phase(Phase::Gathered);
}

void IceAgent::set_remote_candidates(std::vector<TransportCandidate> remotes) {
  if (phase_ != Phase::New && phase_ != Phase::Gathering && phase_ != Phase::Gathered) {
    fail(409, "remote candidates can only be set before checks start");
  }
  if (remotes.empty()) fail(400, "remote candidate list is empty");
  remotes_ = std::move(remotes);
}

void IceAgent::start_checks(Millis now, Io& io) {
  if (phase_ != Phase::Gathered) fail(409, "checks can only start in phase gathered");
  if (remotes_.empty()) fail(409, "remote candidates not set");
  pairs_ = form_pairs(host_candidates_, remotes_);
  for (auto& p : pairs_) {
    p.txid = new_txid_();
    p.next_send = now;
    p.deadline = now + timing_.pair_timeout;
  }
  set_phase(Phase::Checking);
  for (const auto& v : early_validated_) mark_validated(v.component, v.remote);
  early_validated_.clear();
  advance(now, io);
}

void IceAgent::mark_validated(std::size_t component, const Endpoint& remote) {
  for (auto& p : pairs_) {
    if (p.component == component && p.remote.address == remote.address && p.remote.port == remote.port) {
      if (p.state != CandidatePair::State::Succeeded) {
        p.state = CandidatePair::State::Succeeded;
        p.failure.clear();
      }
      return;
    }
  }
  CandidatePair p;
  p.component = component;
  p.local = host_candidates_[component];
  p.remote = {"udp", remote.address, remote.port, 0, "prflx"};
  p.priority = pair_priority(p.local, p.remote);
  p.state = CandidatePair::State::Succeeded;
  pairs_.push_back(std::move(p));
}

bool IceAgent::on_datagram(std::size_t component, const Endpoint& from, std::span<const std::uint8_t> data,
                           Millis now, Io& io) {
  auto msg = decode_check(data);
  if (!msg || component >= components_.size()) return false;
  if (msg->type == "ping") {
    if (io.send(component, from, encode_check({"pong", msg->txid, std::nullopt}))) {
      answered_[msg->txid] = {component, from};
    }
  } else if (msg->type == "pong") {
    for (auto& p : pairs_) {
      if (p.txid != msg->txid) continue;
      if (p.state == CandidatePair::State::Waiting || p.state == CandidatePair::State::InProgress) {
        p.state = CandidatePair::State::Succeeded;
      }
      if (p.state == CandidatePair::State::Succeeded) io.send(component, from, encode_check({"ack", msg->txid, {}}));
      break;
    }
  } else if (msg->type == "ack") {
    auto it = answered_.find(msg->txid);
    if (it != answered_.end()) {
      if (phase_ == Phase::Checking) {
        mark_validated(it->second.component, it->second.remote);
      } else if (phase_ == Phase::New || phase_ == Phase::Gathering || phase_ == Phase::Gathered) {
        early_validated_.push_back(it->second);
      }
    }
  } else if (msg->type == "mapped") {
    if (phase_ == Phase::Gathering && component < gathering_.size()) {
      auto& g = gathering_[component];
      if (!g.done && g.txid == msg->txid) {
        g.done = true;
        const auto& host = components_[component];
        if (*msg->addr != host) {
          locals_.push_back({"udp", msg->addr->address, msg->addr->port, srflx_priority(component), "srflx"});
        }
      }
    }
  } else {
    return false;  // "bind" is answered by reflectors, not agents
  }
  advance(now, io);
  return true;
}

void IceAgent::advance(Millis now, Io& io) {
  const int max_sends = 1 + timing_.retries;
  if (phase_ == Phase::Gathering) {
    for (std::size_t i = 0; i < gathering_.size(); ++i) {
      auto& g = gathering_[i];
      if (g.done || g.sends >= max_sends || now < g.next_send) continue;
      if (!io.send(i, *reflector_, encode_check({"bind", g.txid, std::nullopt}))) {
        g.done = true;
        continue;
      }
      ++g.sends;
      g.next_send = now + timing_.retransmit;
    }
    finish_gathering_if_done(now);
    return;
  }
  if (phase_ != Phase::Checking) return;
  for (auto& p : pairs_) {
    if (p.state != CandidatePair::State::Waiting && p.state != CandidatePair::State::InProgress) continue;
    if (now >= p.deadline) {
      p.state = CandidatePair::State::Failed;
      p.failure = "timeout";
      continue;
    }
    if (p.sends >= max_sends || now < p.next_send) continue;
    if (!io.send(p.component, Endpoint{p.remote.address, static_cast<std::uint16_t>(p.remote.port)},
                 encode_check({"ping", p.txid, std::nullopt}))) {
      p.state = CandidatePair::State::Failed;
      p.failure = "denied";
      continue;
    }
    ++p.sends;
    p.state = CandidatePair::State::InProgress;
    p.next_send = now + timing_.retransmit;
  }
  evaluate();
}

void IceAgent::evaluate() {
  if (phase_ != Phase::Checking) return;
  const CandidatePair* best = nullptr;
  bool pending = false;
  for (const auto& p : pairs_) {
    if (p.state == CandidatePair::State::Succeeded && (!best || p.priority > best->priority)) best = &p;
    if (p.state == CandidatePair::State::Waiting || p.state == CandidatePair::State::InProgress) pending = true;
  }
  if (best) {
    const bool higher_pending = std::any_of(pairs_.begin(), pairs_.end(), [&](const CandidatePair& p) {
      return (p.state == CandidatePair::State::Waiting || p.state == CandidatePair::State::InProgress) &&
             p.priority > best->priority;
    });
    if (!higher_pending) {
      selected_ = *best;
      set_phase(Phase::Connected);
    }
  } else if (!pending) {
    set_phase(Phase::Failed);
  }
}

nlohmann::json IceAgent::failures_json() const {
  auto out = nlohmann::json::array();
  for (const auto& p : pairs_) {
    if (p.state != CandidatePair::State::Failed) continue;
    out.push_back({{"local", p.local}, {"remote", p.remote}, {"reason", p.failure}});
  }
  return out;
}

nlohmann::json IceAgent::to_json() const {
  auto pairs = nlohmann::json::array();
  for (const auto& p : pairs_) {
    pairs.push_back({{"local", p.local},
                     {"remote", p.remote},
                     {"priority", p.priority},
                     {"state", to_string(p.state)},
                     {"failure", p.failure}});
  }
  nlohmann::json j = {{"phase", to_string(phase_)},
                      {"local_candidates", locals_},
                      {"remote_candidates", remotes_},
                      {"pairs", std::move(pairs)}};
  j["selected_pair"] = selected_ ? nlohmann::json{{"local", selected_->local}, {"remote", selected_->remote}}
                                 : nlohmann::json(nullptr);
  return j;
}

}  // namespace webcomm::ice
