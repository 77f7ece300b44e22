#include "webcomm/sim/scenario.hpp"

#include "webcomm/core/error.hpp"
#include "webcomm/sim/world.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace webcomm::sim {
namespace {

using nlohmann::json;
using sdk::CallState;

constexpr CallState kAllStates[] = {CallState::Idle,    CallState::Registering, CallState::Online,
                                    CallState::Inviting, CallState::Invited,    CallState::Joining,
                                    CallState::InCall,  CallState::Ended,       CallState::Failed};

[[noreturn]] void invalid(const std::string& msg) { throw ScenarioError(msg); }

CallState parse_state(const std::string& name) {
  for (auto s : kAllStates) {
    if (to_string(s) == name) return s;
  }
  invalid("unknown state: " + name);
}

bool is_login_state(CallState s) {
  return s == CallState::Idle || s == CallState::Registering || s == CallState::Online;
}

std::uint64_t handle_number(const std::string& h) { return std::stoull(h.substr(1)); }

std::string field(const json& step, const char* key) {
  if (!step.contains(key) || !step[key].is_string()) {
    invalid("step " + step.dump() + " needs string field '" + key + "'");
  }
  return step[key].get<std::string>();
}

std::optional<std::string> opt_field(const json& step, const char* key) {
  if (!step.contains(key)) return std::nullopt;
  if (!step[key].is_string()) invalid(std::string("field '") + key + "' must be a string");
  return step[key].get<std::string>();
}

NatConfig parse_nat(const json& j) {
  NatConfig nat;
  try {
    if (j.contains("mapping")) nat.mapping = mapping_from_string(j["mapping"].get<std::string>());
    if (j.contains("filtering")) nat.filtering = filtering_from_string(j["filtering"].get<std::string>());
    if (j.contains("public_ip")) nat.public_ip = j["public_ip"].get<std::string>();
    if (j.contains("binding_ttl_s")) nat.binding_ttl = std::chrono::seconds(j["binding_ttl_s"].get<int>());
  } catch (const std::exception& e) {
    invalid(std::string("bad nat: ") + e.what());
  }
  return nat;
}

std::unique_ptr<adaptor::ApprovalPolicy> parse_policy(const json& j) {
  try {
    if (j.is_string()) return std::make_unique<adaptor::StaticPolicy>(adaptor::decision_from_string(j.get<std::string>()));
    if (j.is_object()) return std::make_unique<adaptor::RulePolicy>(adaptor::RulePolicy::from_json(j));
  } catch (const std::exception& e) {
    invalid(std::string("bad policy: ") + e.what());
  }
  invalid("policy must be a decision name or a rule set");
}

class Runner {
 public:
  Runner(const json& script, std::filesystem::path base_dir) : script_(script), base_dir_(std::move(base_dir)) {
    if (!script_.is_object()) invalid("scenario must be a JSON object");
    WorldConfig cfg;
    try {
      cfg.seed = script_.value("seed", std::uint64_t{1});
      cfg.link.seed = cfg.seed;
      cfg.step = Millis{script_.value("step_ms", 5)};
      if (script_.contains("link")) {
        const auto& l = script_["link"];
        cfg.link.delay = Millis{l.value("delay_ms", 10)};
        cfg.link.loss = l.value("loss", 0.0);
      }
      if (script_.contains("reflector")) {
        if (script_["reflector"].is_null()) {
          cfg.reflector.reset();
        } else {
          cfg.reflector = Endpoint::parse(script_["reflector"].get<std::string>());
          if (!cfg.reflector) invalid("bad reflector address");
        }
      }
      if (script_.contains("ids")) {
        cfg.contact_start = script_["ids"].value("contact_start", 1);
        cfg.call_start = script_["ids"].value("call_start", 100);
      }
    } catch (const json::exception& e) {
      invalid(std::string("bad scenario header: ") + e.what());
    }
    if (cfg.step <= Millis{0}) invalid("step_ms must be positive");
    world_ = std::make_unique<World>(cfg);
  }

  ScenarioReport run() {
    json steps_out = json::array();
    json asserts_out = json::array();
    const json steps = script_.value("steps", json::array());
    if (!steps.is_array()) invalid("steps must be an array");
    bool stopped = false;
    bool pass = true;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& step = steps[i];
      if (!step.is_object()) invalid("step " + std::to_string(i) + " is not an object");
      const auto op = field(step, "op");
      json rec = {{"index", i}, {"op", op}};
      if (stopped) {
        rec["outcome"] = "skipped";
        steps_out.push_back(rec);
        continue;
      }
      if (op == "assert") {
        auto a = check(step);
        a["index"] = i;
        const bool ok = a["outcome"] == "pass";
        pass = pass && ok;
        rec["outcome"] = ok ? "ok" : "fail";
        asserts_out.push_back(std::move(a));
        steps_out.push_back(rec);
        continue;
      }
      std::string detail;
      bool ok = false;
      try {
        ok = execute(op, step, detail);
      } catch (const ApiError& e) {
        ok = false;
        detail = std::to_string(e.status()) + " " + e.what();
      }
      rec["outcome"] = ok ? "ok" : "fail";
      if (!detail.empty()) rec["detail"] = detail;
      steps_out.push_back(rec);
      if (!ok) {
        pass = false;
        stopped = true;
      }
    }

    json states = json::object();
    for (const auto& name : spawned_) {
      auto& p = world_->phone(name);
      json calls = json::object();
      for (const auto& [call_name, bound] : calls_) {
        if (bound.first != name) continue;
        json t = json::array();
        for (auto s : p.call(bound.second).trace()) t.push_back(std::string(to_string(s)));
        calls[call_name] = {{"states", t}, {"reason", p.call(bound.second).reason()}};
      }
      json login = json::array();
      for (auto s : p.login_state().trace()) login.push_back(std::string(to_string(s)));
      states[name] = {{"login", login}, {"calls", calls}};
    }

    ScenarioReport report;
    report.pass = pass;
    report.json = {{"scenario", script_.value("name", "")},
                   {"result", pass ? "pass" : "fail"},
                   {"elapsed_ms", world_->elapsed().count()},
                   {"steps", steps_out},
                   {"asserts", asserts_out},
                   {"states", states},
                   {"trace", world_->trace().lines()}};
    return report;
  }

 private:
  sdk::Phone& phone(const std::string& name) {
    if (!world_->has_phone(name)) invalid("unknown phone: " + name);
    return world_->phone(name);
  }

  bool is_bound(const std::string& phone_name, const std::string& handle) const {
    return std::any_of(calls_.begin(), calls_.end(),
                       [&](const auto& kv) { return kv.second.first == phone_name && kv.second.second == handle; });
  }

  /// Newest call on the phone that no name refers to yet.
  std::optional<std::string> newest_unbound(const std::string& phone_name) {
    auto handles = phone(phone_name).calls();
    std::optional<std::string> best;
    for (const auto& h : handles) {
      if (is_bound(phone_name, h)) continue;
      if (!best || handle_number(h) > handle_number(*best)) best = h;
    }
    return best;
  }

  std::optional<std::string> newest(const std::string& phone_name) {
    auto handles = phone(phone_name).calls();
    if (handles.empty()) return std::nullopt;
    return *std::max_element(handles.begin(), handles.end(),
                             [](const auto& a, const auto& b) { return handle_number(a) < handle_number(b); });
  }

  /// The step's "call" name, binding it to the phone's newest unnamed call
  /// on first use; without a name, the phone's newest call.
  std::optional<std::string> resolve(const std::string& phone_name, const json& step) {
    const auto name = opt_field(step, "call");
    if (!name) return newest(phone_name);
    auto it = calls_.find(*name);
    if (it != calls_.end()) {
      if (it->second.first != phone_name) invalid("call '" + *name + "' belongs to " + it->second.first);
      return it->second.second;
    }
    auto h = newest_unbound(phone_name);
    if (h) calls_[*name] = {phone_name, *h};
    return h;
  }

  void bind(const std::string& name, const std::string& phone_name, const std::string& handle) {
    if (calls_.count(name)) invalid("call name reused: " + name);
    calls_[name] = {phone_name, handle};
  }

  bool execute(const std::string& op, const json& step, std::string& detail) {
    if (op == "spawn") return spawn(step);
    if (op == "login") {
      phone(field(step, "phone")).login();
      return true;
    }
    if (op == "call") {
      const auto who = field(step, "phone");
      const auto h = phone(who).place_call(field(step, "to"));
      bind(opt_field(step, "as").value_or(who + "#" + h.substr(1)), who, h);
      return true;
    }
    if (op == "accept" || op == "reject" || op == "hangup") {
      const auto who = field(step, "phone");
      auto h = resolve(who, step);
      if (!h) {
        detail = "no call to " + op;
        return false;
      }
      auto& p = phone(who);
      if (op == "accept") p.accept(*h);
      if (op == "reject") p.reject(*h);
      if (op == "hangup") p.hangup(*h);
      world_->step();
      return true;
    }
    if (op == "advance-clock") {
      if (!step.contains("ms") || !step["ms"].is_number_integer()) invalid("advance-clock needs integer 'ms'");
      world_->run_for(Millis{step["ms"].get<std::int64_t>()});
      return true;
    }
    if (op == "wait-for-state") return wait(step, detail);
    invalid("unknown op: " + op);
  }

  bool spawn(const json& step) {
    const auto name = field(step, "name");
    const auto host = field(step, "host");
    if (world_->has_phone(name)) invalid("phone spawned twice: " + name);
    if (!world_->has_host(host)) {
      std::optional<NatConfig> nat;
      if (step.contains("nat") && !step["nat"].is_null()) nat = parse_nat(step["nat"]);
      std::unique_ptr<adaptor::ApprovalPolicy> policy;
      if (step.contains("policy")) policy = parse_policy(step["policy"]);
      world_->add_host(host, nat, std::move(policy));
    } else if (step.contains("nat") || step.contains("policy")) {
      invalid("host " + host + " already exists; nat and policy belong to its first spawn");
    }
    sdk::PhoneConfig cfg;
    cfg.aor = field(step, "aor");
    try {
      if (step.contains("codecs")) cfg.codecs_supported = step["codecs"].get<std::vector<std::string>>();
      if (step.contains("preferred")) cfg.codecs_preferred = step["preferred"].get<std::vector<std::string>>();
      cfg.receive_calls = step.value("receive_calls", true);
    } catch (const json::exception& e) {
      invalid(std::string("bad spawn: ") + e.what());
    }
    world_->add_phone(name, host, cfg);
    spawned_.push_back(name);
    return true;
  }

  bool wait(const json& step, std::string& detail) {
    const auto who = field(step, "phone");
    const auto target = parse_state(field(step, "state"));
    const Millis timeout{step.value("timeout_ms", 5000)};
    auto& p = phone(who);
    const bool login = !step.contains("call") && is_login_state(target);
    std::optional<std::string> h;
    bool dead_end = false;
    const bool ok = world_->run_until(
        [&] {
          if (login) return p.login_state().state() == target;
          if (!h) h = step.contains("call") ? resolve(who, step) : newest(who);
          if (!h) return false;
          const auto& sm = p.call(*h);
          if (sm.state() == target) return true;
          dead_end = sm.terminal();
          return dead_end;
        },
        timeout);
    const auto& sm = login ? p.login_state() : (h ? p.call(*h) : p.login_state());
    if (ok && !dead_end) return true;
    detail = std::string(ok ? "ended in " : "timeout in ") + std::string(to_string(sm.state())) +
             (sm.reason().empty() ? "" : " (" + sm.reason() + ")") + " waiting for " +
             std::string(to_string(target));
    if (!login && !h) detail = "timeout: no call appeared";
    return false;
  }

  json check(const json& step) {
    const auto what = field(step, "observable");
    json out = {{"observable", what}};
    json expected;
    json actual;
    bool ok = false;
    try {
      if (what == "state" || what == "reason") {
        const auto who = field(step, "phone");
        auto& p = phone(who);
        expected = field(step, "equals");
        const bool login = !step.contains("call") && what == "state" &&
                           is_login_state(parse_state(expected.get<std::string>()));
        if (login) {
          actual = std::string(to_string(p.login_state().state()));
        } else if (auto h = resolve(who, step)) {
          const auto& sm = p.call(*h);
          actual = what == "state" ? std::string(to_string(sm.state())) : sm.reason();
        }
        ok = actual == expected;
      } else if (what == "participants") {
        const auto who = field(step, "phone");
        expected = step.at("equals");
        actual = 0;
        if (auto h = resolve(who, step)) {
          if (auto id = phone(who).call_id(*h)) {
            try {
              actual = world_->service().get_call(*id)["participants"].size();
            } catch (const ApiError&) {
            }
          }
        }
        ok = actual == expected;
      } else if (what == "contact") {
        expected = field(step, "equals");
        const auto& path = phone(field(step, "phone")).contact_path();
        actual = path ? json(*path) : json(nullptr);
        ok = actual == expected;
      } else if (what == "counter") {
        const auto host = field(step, "host");
        const auto name = field(step, "name");
        if (!world_->has_host(host)) invalid("unknown host: " + host);
        actual = counter(host, name);
        ok = compare(step, actual.get<std::uint64_t>(), expected);
      } else if (what == "objects") {
        const auto who = field(step, "phone");
        phone(who);
        actual = world_->adaptor_api(who).list_objects()["objects"].size();
        ok = compare(step, actual.get<std::uint64_t>(), expected);
      } else if (what == "event") {
        const auto who = field(step, "who");
        const auto type = field(step, "type");
        std::uint64_t n = 0;
        for (const auto& e : world_->trace().entries()) n += e.who == who && e.kind == type;
        actual = n;
        if (!step.contains("equals") && !step.contains("at_least") && !step.contains("at_most")) {
          expected = {{"at_least", 1}};
          ok = n >= 1;
        } else {
          ok = compare(step, n, expected);
        }
      } else if (what == "media") {
        ok = media(step, expected, actual);
      } else if (what == "trace") {
        ok = trace(step, expected, actual);
      } else {
        invalid("unknown observable: " + what);
      }
    } catch (const json::exception& e) {
      invalid("bad assert " + step.dump() + ": " + e.what());
    }
    out["outcome"] = ok ? "pass" : "fail";
    out["expected"] = expected;
    out["actual"] = actual;
    return out;
  }

  bool compare(const json& step, std::uint64_t value, json& expected) {
    expected = json::object();
    bool ok = true;
    for (const char* key : {"equals", "at_least", "at_most"}) {
      if (!step.contains(key)) continue;
      const auto bound = step[key].get<std::uint64_t>();
      expected[key] = bound;
      if (std::string(key) == "equals") ok = ok && value == bound;
      if (std::string(key) == "at_least") ok = ok && value >= bound;
      if (std::string(key) == "at_most") ok = ok && value <= bound;
    }
    if (expected.empty()) invalid("assert needs equals, at_least or at_most");
    return ok;
  }

  std::uint64_t counter(const std::string& host, const std::string& name) {
    if (name == "datagrams_sent") return world_->adaptor(host).datagrams_sent();
    const auto c = world_->network().counters(host);
    if (name == "out_injected") return c.out_injected;
    if (name == "out_delivered") return c.out_delivered;
    if (name == "out_dropped") return c.out_dropped;
    if (name == "in_injected") return c.in_injected;
    if (name == "in_delivered") return c.in_delivered;
    if (name == "in_dropped") return c.in_dropped;
    invalid("unknown counter: " + name);
  }

  static std::uint64_t frames(const json& stats, const char* part) {
    if (!stats.contains(part)) return 0;
    return stats[part].value("frames", std::uint64_t{0});
  }

  /// Frames the receiver's speaker got over the window, against frames the
  /// sender's microphone produced in it.
  bool media(const json& step, json& expected, json& actual) {
    const auto from = field(step, "from");
    const auto to = field(step, "to");
    const Millis window{step.value("window_ms", 5000)};
    const double min_ratio = step.value("min_ratio", 0.98);
    expected = {{"min_ratio", min_ratio}, {"window_ms", window.count()}};
    auto hs = resolve(from, step);
    auto hr = newest(to);
    if (!hs || !hr) {
      actual = {{"error", "no call"}};
      return false;
    }
    auto& ps = phone(from);
    auto& pr = phone(to);
    const auto sent0 = frames(ps.media_stats(*hs), "mic");
    const auto got0 = frames(pr.media_stats(*hr), "speaker");
    world_->run_for(window);
    const auto sent = frames(ps.media_stats(*hs), "mic") - sent0;
    const auto got = frames(pr.media_stats(*hr), "speaker") - got0;
    const double ratio = sent == 0 ? 0.0 : static_cast<double>(got) / static_cast<double>(sent);
    actual = {{"sent", sent}, {"received", got}, {"ratio", ratio}};
    return sent > 0 && ratio >= min_ratio;
  }

  bool trace(const json& step, json& expected, json& actual) {
    std::vector<std::string> kinds;
    if (step.contains("kinds")) kinds = step["kinds"].get<std::vector<std::string>>();
    std::vector<std::string> want;
    if (step.contains("equals")) {
      want = step["equals"].get<std::vector<std::string>>();
    } else {
      const auto ref = field(step, "reference");
      auto path = std::filesystem::path(ref);
      if (path.is_relative()) path = base_dir_ / path;
      std::ifstream in(path);
      if (!in) invalid("cannot read reference trace: " + path.string());
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) want.push_back(line);
      }
    }
    const auto got = world_->trace().lines(kinds);
    expected = want;
    actual = got;
    return got == want;
  }

  json script_;
  std::filesystem::path base_dir_;
  std::unique_ptr<World> world_;
  std::vector<std::string> spawned_;
  std::map<std::string, std::pair<std::string, std::string>> calls_;
};

}  // namespace

ScenarioReport run_scenario(const nlohmann::json& script, const std::filesystem::path& base_dir) {
  Runner runner(script, base_dir);
  return runner.run();
}

ScenarioReport run_scenario_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("cannot open scenario: " + file.string());
  nlohmann::json script;
  try {
    script = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario is not valid JSON: " + std::string(e.what()));
  }
  return run_scenario(script, file.parent_path());
}

}  // namespace webcomm::sim
