#include "webcomm/signaling/service.hpp"

#include "webcomm/core/encoding.hpp"
#include "webcomm/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <mutex>

namespace webcomm::signaling {
namespace {

int counter_of(const std::string& id) {
  if (id.size() < 2 || id[0] != 'c') return -1;
  int n = -1;
  auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), n);
  if (ec != std::errc{} || ptr != id.data() + id.size()) return -1;
  return n;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::string SequentialIds::next_contact_id(const std::string& aor) {
  auto [it, inserted] = next_contact_.try_emplace(aor, contact_start_);
  return "c" + std::to_string(it->second++);
}

std::string SequentialIds::next_call_id() { return "c" + std::to_string(next_call_++); }

void SequentialIds::reserve_contact_id(const std::string& aor, const std::string& id) {
  const int n = counter_of(id);
  if (n < 0) return;
  auto [it, inserted] = next_contact_.try_emplace(aor, contact_start_);
  it->second = std::max(it->second, n + 1);
}

void SequentialIds::reserve_call_id(const std::string& id) {
  const int n = counter_of(id);
  if (n >= 0) next_call_ = std::max(next_call_, n + 1);
}

SignalingService::SignalingService(const Clock& clock, std::unique_ptr<Store> store,
                                   std::unique_ptr<IdGenerator> ids, ServiceConfig config)
    : clock_(clock), store_(std::move(store)), ids_(std::move(ids)), config_(std::move(config)) {
  for (const auto& record : store_->load()) replay(record);
}

std::string SignalingService::authenticate(const std::string& aor, const std::string& secret) {
  if (aor.find('@') == std::string::npos || aor.find('/') != std::string::npos) {
    fail(400, "aor must be an email-style address");
  }
  if (secret != config_.shared_secret) fail(401, "bad credentials");
  auto token = random_hex(16);
  std::lock_guard lock(token_mu_);
  tokens_[token] = aor;
  return token;
}

std::string SignalingService::principal(const std::string& token) const {
  std::lock_guard lock(token_mu_);
  auto it = tokens_.find(token);
  return it == tokens_.end() ? std::string{} : it->second;
}

void SignalingService::require_auth(const std::string& caller) const {
  if (caller.empty()) fail(401, "authentication required");
}

bool SignalingService::online_locked(const std::string& aor) const {
  auto it = logins_.find(aor);
  if (it == logins_.end()) return false;
  const auto now = clock_.now();
  return std::any_of(it->second.contacts.begin(), it->second.contacts.end(),
                     [&](const auto& kv) { return kv.second.expires_at > now; });
}

const ConferenceResource* SignalingService::live_call_locked(const std::string& call_id) const {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return nullptr;
  const auto& conf = it->second;
  if (conf.empty_since && clock_.now() - *conf.empty_since >= config_.empty_call_grace) return nullptr;
  return &conf;
}

ConferenceResource& SignalingService::live_call_or_404(const std::string& call_id) {
  if (!live_call_locked(call_id)) fail(404, "no such call: " + call_id);
  return calls_.at(call_id);
}

Millis SignalingService::clamp_expiry(const json& body) const {
  Millis expiry = config_.default_expiry;
  if (body.contains("expires_seconds")) {
    if (!body["expires_seconds"].is_number()) fail(400, "expires_seconds must be a number");
    expiry = Millis{static_cast<std::int64_t>(body["expires_seconds"].get<double>() * 1000.0)};
  }
  return std::clamp(expiry, config_.min_expiry, config_.max_expiry);
}

std::size_t SignalingService::publish_locked(const std::string& path, const std::string& type, json payload) {
  auto it = subscriptions_.find(path);
  if (it == subscriptions_.end()) return 0;
  std::size_t delivered = 0;
  const double ts = to_seconds(clock_.now());
  auto& subs = it->second;
  for (auto sit = subs.begin(); sit != subs.end();) {
    auto& sub = **sit;
    json frame = {{"seq", sub.next_seq}, {"type", type}, {"resource", path}, {"timestamp", ts},
                  {"payload", payload}};
    if (observer_) observer_(sub, frame);
    if (!sub.queue->push(std::move(frame))) {
      sit = subs.erase(sit);
      continue;
    }
    ++sub.next_seq;
    ++delivered;
    ++sit;
  }
  if (subs.empty()) subscriptions_.erase(it);
  return delivered;
}

void SignalingService::close_subscriptions_locked(const std::string& path) {
  auto it = subscriptions_.find(path);
  if (it == subscriptions_.end()) return;
  for (auto& sub : it->second) sub->queue->close();
  subscriptions_.erase(it);
}

json SignalingService::register_contact(const std::string& caller, const std::string& aor, const json& body) {
  require_auth(caller);
  if (caller != aor) fail(403, "authenticated as a different aor");
  if (!body.is_object() || !body.contains("candidates")) fail(400, "body must carry candidates");
  auto candidates = parse_candidates(body["candidates"]);
  validate_candidates(candidates);
  const auto expiry = clamp_expiry(body);
  json presence = body.value("presence", json::object());
  if (!presence.is_object()) fail(400, "presence must be an object");

  std::unique_lock lock(mu_);
  auto& login = logins_[aor];
  std::string cid;
  do {
    cid = ids_->next_contact_id(aor);
  } while (login.contacts.count(cid));

  const auto now = clock_.now();
  ContactRecord rec{aor, cid, std::move(candidates), now, now + expiry, std::move(presence)};
  auto rep = contact_to_json(rec);
  login.contacts.emplace(cid, std::move(rec));
  store_->append({{"op", "register"}, {"contact", rep}});
  publish_locked("/login/" + aor, "contact-update", {{"action", "register"}, {"contact", rep}, {"online", true}});
  return {{"contact_id", cid}, {"contact_path", "/login/" + aor + "/" + cid}, {"expires_at", rep["expires_at"]}};
}

json SignalingService::update_contact(const std::string& caller, const std::string& aor,
                                      const std::string& contact_id, const json& body) {
  require_auth(caller);
  if (caller != aor) fail(403, "contact owned by a different aor");
  if (!body.is_object()) fail(400, "body must be an object");
  std::optional<std::vector<TransportCandidate>> candidates;
  if (body.contains("candidates")) {
    candidates = parse_candidates(body["candidates"]);
    validate_candidates(*candidates);
  }
  if (body.contains("presence") && !body["presence"].is_object()) fail(400, "presence must be an object");
  const auto expiry = clamp_expiry(body);

  std::unique_lock lock(mu_);
  const auto now = clock_.now();
  auto lit = logins_.find(aor);
  if (lit == logins_.end()) fail(404, "no such contact");
  auto cit = lit->second.contacts.find(contact_id);
  if (cit == lit->second.contacts.end() || cit->second.expires_at <= now) fail(404, "no such contact");
  auto& rec = cit->second;
  if (candidates) rec.candidates = std::move(*candidates);
  if (body.contains("presence")) rec.presence = body["presence"];
  rec.expires_at = now + expiry;
  auto rep = contact_to_json(rec);
  store_->append({{"op", "update"}, {"contact", rep}});
  publish_locked("/login/" + aor, "contact-update", {{"action", "update"}, {"contact", rep}, {"online", true}});
  return rep;
}

void SignalingService::unregister_contact(const std::string& caller, const std::string& aor,
                                          const std::string& contact_id) {
  require_auth(caller);
  if (caller != aor) fail(403, "contact owned by a different aor");
  std::unique_lock lock(mu_);
  const auto now = clock_.now();
  auto lit = logins_.find(aor);
  if (lit == logins_.end()) fail(404, "no such contact");
  auto cit = lit->second.contacts.find(contact_id);
  if (cit == lit->second.contacts.end() || cit->second.expires_at <= now) fail(404, "no such contact");
  lit->second.contacts.erase(cit);
  store_->append({{"op", "unregister"}, {"aor", aor}, {"contact_id", contact_id}});
  const bool still_online = online_locked(aor);
  const auto path = "/login/" + aor;
  publish_locked(path, "contact-update",
                 {{"action", "unregister"}, {"contact_id", contact_id}, {"online", still_online}});
  if (!still_online) close_subscriptions_locked(path);
  if (lit->second.contacts.empty()) logins_.erase(lit);
}

json SignalingService::list_logins(int offset, int limit) const {
  if (offset < 0) fail(400, "offset must be >= 0");
  if (limit < 1 || limit > config_.max_limit) {
    fail(400, "limit must be in 1.." + std::to_string(config_.max_limit));
  }
  std::shared_lock lock(mu_);
  std::vector<std::string> online;
  for (const auto& [aor, login] : logins_) {
    if (online_locked(aor)) online.push_back(aor);
  }
  json items = json::array();
  for (std::size_t i = static_cast<std::size_t>(offset);
       i < online.size() && items.size() < static_cast<std::size_t>(limit); ++i) {
    items.push_back(online[i]);
  }
  return {{"total", online.size()}, {"offset", offset}, {"limit", limit}, {"items", std::move(items)}};
}

json SignalingService::get_login(const std::string& aor) const {
  std::shared_lock lock(mu_);
  auto it = logins_.find(aor);
  json contacts = json::array();
  if (it != logins_.end()) {
    const auto now = clock_.now();
    for (const auto& [cid, rec] : it->second.contacts) {
      if (rec.expires_at > now) contacts.push_back(contact_to_json(rec));
    }
  }
  if (contacts.empty()) fail(404, aor + " is offline");
  return {{"aor", aor}, {"online", true}, {"contacts", std::move(contacts)}};
}

json SignalingService::create_call(const std::string& caller) {
  require_auth(caller);
  std::unique_lock lock(mu_);
  std::string id;
  do {
    id = ids_->next_call_id();
  } while (calls_.count(id));
  const auto now = clock_.now();
  ConferenceResource conf;
  conf.call_id = id;
  conf.created_at = now;
  conf.empty_since = now;
  calls_.emplace(id, std::move(conf));
  store_->append({{"op", "call"}, {"call_id", id}, {"created_at", to_seconds(now)}});
  return {{"call_id", id}, {"call_path", "/call/" + id}};
}

json SignalingService::membership_payload(const ConferenceResource& conf, const std::string& action,
                                          const std::string& participant_id) const {
  return {{"action", action},
          {"participant_id", participant_id},
          {"participants", conference_to_json(conf)["participants"]}};
}

json SignalingService::join_call(const std::string& caller, const std::string& call_id, const json& session) {
  require_auth(caller);
  auto parsed = parse_session(session);
  validate_session(parsed);
  std::unique_lock lock(mu_);
  auto& conf = live_call_or_404(call_id);
  ParticipantEntry entry{"p" + std::to_string(conf.next_participant++), caller, std::move(parsed), clock_.now()};
  const auto pid = entry.participant_id;
  store_->append({{"op", "join"}, {"call_id", call_id}, {"participant", participant_to_json(entry)}});
  conf.participants.push_back(std::move(entry));
  conf.empty_since.reset();
  publish_locked("/call/" + call_id, "membership-change", membership_payload(conf, "join", pid));
  return {{"participant_id", pid},
          {"participant_path", "/call/" + call_id + "/" + pid},
          {"call_path", "/call/" + call_id}};
}

void SignalingService::leave_call(const std::string& caller, const std::string& call_id,
                                  const std::string& participant_id) {
  require_auth(caller);
  std::unique_lock lock(mu_);
  auto& conf = live_call_or_404(call_id);
  auto it = std::find_if(conf.participants.begin(), conf.participants.end(),
                         [&](const auto& p) { return p.participant_id == participant_id; });
  if (it == conf.participants.end()) fail(404, "no such participant: " + participant_id);
  if (it->aor != caller) fail(403, "participant owned by a different aor");
  conf.participants.erase(it);
  const auto now = clock_.now();
  if (conf.participants.empty()) conf.empty_since = now;
  store_->append({{"op", "leave"}, {"call_id", call_id}, {"participant_id", participant_id}, {"at", to_seconds(now)}});
  publish_locked("/call/" + call_id, "membership-change", membership_payload(conf, "leave", participant_id));
}

json SignalingService::get_call(const std::string& call_id) const {
  std::shared_lock lock(mu_);
  const auto* conf = live_call_locked(call_id);
  if (!conf) fail(404, "no such call: " + call_id);
  return conference_to_json(*conf);
}

json SignalingService::list_calls() const {
  std::shared_lock lock(mu_);
  json items = json::array();
  for (const auto& [id, conf] : calls_) {
    if (live_call_locked(id)) items.push_back("/call/" + id);
  }
  return {{"total", items.size()}, {"items", std::move(items)}};
}

std::shared_ptr<Subscription> SignalingService::subscribe(const std::string& caller, const std::string& path) {
  require_auth(caller);
  std::unique_lock lock(mu_);
  if (starts_with(path, "/login/")) {
    const auto aor = path.substr(7);
    if (aor != caller) fail(403, "only the owner may subscribe to " + path);
    if (!online_locked(aor)) fail(404, "no such login resource: " + path);
  } else if (starts_with(path, "/call/")) {
    const auto id = path.substr(6);
    const auto* conf = live_call_locked(id);
    if (!conf) fail(404, "no such call: " + id);
    const bool member = std::any_of(conf->participants.begin(), conf->participants.end(),
                                    [&](const auto& p) { return p.aor == caller; });
    if (!member) fail(403, "only participants may subscribe to " + path);
  } else {
    fail(404, "no such resource: " + path);
  }
  auto sub = std::make_shared<Subscription>();
  sub->sub_id = "s" + std::to_string(next_sub_++);
  sub->resource_path = path;
  sub->owner = caller;
  sub->queue = std::make_shared<EventQueue>();
  subscriptions_[path].push_back(sub);
  if (starts_with(path, "/call/")) {
    // A conference subscription opens with the current membership.
    const auto* conf = live_call_locked(path.substr(6));
    json frame = {{"seq", sub->next_seq++},
                  {"type", "membership-change"},
                  {"resource", path},
                  {"timestamp", to_seconds(clock_.now())},
                  {"payload", membership_payload(*conf, "snapshot", "")}};
    if (observer_) observer_(*sub, frame);
    sub->queue->push(std::move(frame));
  }
  return sub;
}

void SignalingService::unsubscribe(const std::string& sub_id) {
  std::unique_lock lock(mu_);
  for (auto it = subscriptions_.begin(); it != subscriptions_.end(); ++it) {
    auto& subs = it->second;
    auto sit = std::find_if(subs.begin(), subs.end(), [&](const auto& s) { return s->sub_id == sub_id; });
    if (sit == subs.end()) continue;
    (*sit)->queue->close();
    subs.erase(sit);
    if (subs.empty()) subscriptions_.erase(it);
    return;
  }
}

json SignalingService::notify(const std::string& caller, const std::string& path, const json& payload) {
  require_auth(caller);
  if (!payload.is_object() || !payload.contains("type") || !payload["type"].is_string()) {
    fail(400, "notify payload must carry a type");
  }
  const auto type = payload["type"].get<std::string>();
  std::unique_lock lock(mu_);
  if (starts_with(path, "/login/")) {
    if (!online_locked(path.substr(7))) fail(404, "no such login resource: " + path);
    if (type != "invitation" && type != "cancellation") fail(400, "login notify type must be invitation or cancellation");
    if (!payload.contains("conference") || !payload["conference"].is_string()) {
      fail(400, "payload missing conference URL");
    }
    if (type == "invitation") {
      if (!payload.contains("time")) fail(400, "invitation missing time");
      if (!payload.contains("return") || !payload["return"].is_string()) {
        fail(400, "invitation missing return notification address");
      }
    }
  } else if (starts_with(path, "/call/")) {
    const auto* conf = live_call_locked(path.substr(6));
    if (!conf) fail(404, "no such call: " + path);
    const bool member = std::any_of(conf->participants.begin(), conf->participants.end(),
                                    [&](const auto& p) { return p.aor == caller; });
    if (!member) fail(403, "only participants may notify " + path);
    if (type != "chat") fail(400, "conference notify type must be chat");
    if (!payload.contains("text") || !payload["text"].is_string()) fail(400, "chat payload missing text");
  } else {
    fail(404, "no such resource: " + path);
  }
  json body = payload;
  body["from"] = caller;
  return {{"delivered", publish_locked(path, type, std::move(body))}};
}

void SignalingService::reap() {
  std::unique_lock lock(mu_);
  const auto now = clock_.now();
  for (auto lit = logins_.begin(); lit != logins_.end();) {
    auto& contacts = lit->second.contacts;
    const auto path = "/login/" + lit->first;
    for (auto cit = contacts.begin(); cit != contacts.end();) {
      if (cit->second.expires_at <= now) {
        const auto cid = cit->first;
        cit = contacts.erase(cit);
        publish_locked(path, "contact-update",
                       {{"action", "expire"}, {"contact_id", cid}, {"online", online_locked(lit->first)}});
      } else {
        ++cit;
      }
    }
    if (contacts.empty()) {
      close_subscriptions_locked(path);
      lit = logins_.erase(lit);
    } else {
      ++lit;
    }
  }
  for (auto it = calls_.begin(); it != calls_.end();) {
    if (!live_call_locked(it->first)) {
      close_subscriptions_locked("/call/" + it->first);
      it = calls_.erase(it);
    } else {
      ++it;
    }
  }
}

json SignalingService::snapshot() const {
  std::shared_lock lock(mu_);
  json logins = json::object();
  for (const auto& [aor, login] : logins_) {
    json contacts = json::object();
    for (const auto& [cid, rec] : login.contacts) contacts[cid] = contact_to_json(rec);
    logins[aor] = std::move(contacts);
  }
  json calls = json::object();
  for (const auto& [id, conf] : calls_) {
    auto c = conference_to_json(conf);
    c["empty_since"] = conf.empty_since ? json(to_seconds(*conf.empty_since)) : json(nullptr);
    calls[id] = std::move(c);
  }
  return {{"logins", std::move(logins)}, {"calls", std::move(calls)}};
}

void SignalingService::replay(const json& record) {
  const auto op = record.value("op", std::string{});
  try {
    if (op == "register" || op == "update") {
      auto rec = contact_from_json(record.at("contact"));
      ids_->reserve_contact_id(rec.aor, rec.contact_id);
      logins_[rec.aor].contacts[rec.contact_id] = std::move(rec);
    } else if (op == "unregister") {
      auto it = logins_.find(record.at("aor").get<std::string>());
      if (it != logins_.end()) {
        it->second.contacts.erase(record.at("contact_id").get<std::string>());
        if (it->second.contacts.empty()) logins_.erase(it);
      }
    } else if (op == "call") {
      ConferenceResource conf;
      conf.call_id = record.at("call_id").get<std::string>();
      conf.created_at = Millis{static_cast<std::int64_t>(record.at("created_at").get<double>() * 1000.0 + 0.5)};
      conf.empty_since = conf.created_at;
      ids_->reserve_call_id(conf.call_id);
      calls_[conf.call_id] = std::move(conf);
    } else if (op == "join") {
      auto it = calls_.find(record.at("call_id").get<std::string>());
      if (it == calls_.end()) return;
      auto entry = participant_from_json(record.at("participant"));
      const int n = std::atoi(entry.participant_id.c_str() + 1);
      it->second.next_participant = std::max(it->second.next_participant, n + 1);
      it->second.participants.push_back(std::move(entry));
      it->second.empty_since.reset();
    } else if (op == "leave") {
      auto it = calls_.find(record.at("call_id").get<std::string>());
      if (it == calls_.end()) return;
      auto& ps = it->second.participants;
      const auto pid = record.at("participant_id").get<std::string>();
      ps.erase(std::remove_if(ps.begin(), ps.end(), [&](const auto& p) { return p.participant_id == pid; }),
               ps.end());
      if (ps.empty()) {
        it->second.empty_since = Millis{static_cast<std::int64_t>(record.at("at").get<double>() * 1000.0 + 0.5)};
      }
    }
  } catch (const json::exception&) {
    // Skip records that do not parse; the rest of the log still applies.
  }
}

}  // namespace webcomm::signaling
