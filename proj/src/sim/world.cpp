#include "webcomm/sim/world.hpp"

#include "webcomm/core/error.hpp"
#include "webcomm/signaling/store.hpp"

namespace webcomm::sim {

World::World(WorldConfig config)
    : config_(std::move(config)),
      start_(clock_.now()),
      next_reap_(start_ + std::chrono::seconds(1)),
      network_(std::make_unique<SimNetwork>(clock_, config_.link)),
      service_(std::make_unique<signaling::SignalingService>(
          clock_, std::make_unique<signaling::MemoryStore>(),
          std::make_unique<signaling::SequentialIds>(config_.contact_start, config_.call_start))) {
  if (config_.reflector) network_->add_reflector(*config_.reflector);
  trace_.observe(*service_);
}

World::~World() {
  for (auto it = phone_order_.rbegin(); it != phone_order_.rend(); ++it) phones_.at(*it).phone.reset();
  phones_.clear();
  hosts_.clear();
  service_->set_observer(nullptr);
}

adaptor::Adaptor& World::add_host(const std::string& ip, std::optional<NatConfig> nat,
                                  std::unique_ptr<adaptor::ApprovalPolicy> policy) {
  if (hosts_.count(ip)) fail(409, "host exists: " + ip);
  auto& net = network_->add_host(ip, std::move(nat));
  HostSlot slot;
  slot.policy = policy ? std::move(policy) : std::make_unique<adaptor::StaticPolicy>(adaptor::Decision::AllowOnce);
  adaptor::AdaptorConfig cfg;
  cfg.bind_address = ip;
  cfg.reflector = config_.reflector;
  cfg.ice_timing = config_.ice_timing;
  cfg.seed = config_.seed * 1000 + hosts_.size() + 1;
  slot.adaptor = std::make_unique<adaptor::Adaptor>(net, clock_, *slot.policy, cfg);
  auto& ref = *slot.adaptor;
  hosts_.emplace(ip, std::move(slot));
  host_order_.push_back(ip);
  return ref;
}

adaptor::Adaptor& World::adaptor(const std::string& ip) {
  auto it = hosts_.find(ip);
  if (it == hosts_.end()) fail(404, "no such host: " + ip);
  return *it->second.adaptor;
}

sdk::Phone& World::add_phone(const std::string& name, const std::string& host_ip, sdk::PhoneConfig config) {
  if (phones_.count(name)) fail(409, "phone exists: " + name);
  auto& host = adaptor(host_ip);
  PhoneSlot slot;
  slot.host = host_ip;
  slot.signaling = std::make_unique<signaling::LocalSignaling>(*service_);
  slot.traced = std::make_unique<TracingSignaling>(*slot.signaling, config.aor, trace_);
  slot.adaptor = std::make_unique<adaptor::LocalAdaptor>(host);
  slot.phone = std::make_unique<sdk::Phone>(*slot.traced, *slot.adaptor, clock_, std::move(config));
  auto& ref = *slot.phone;
  phones_.emplace(name, std::move(slot));
  phone_order_.push_back(name);
  return ref;
}

sdk::Phone& World::phone(const std::string& name) {
  auto it = phones_.find(name);
  if (it == phones_.end()) fail(404, "no such phone: " + name);
  return *it->second.phone;
}

const std::string& World::host_of(const std::string& name) const {
  auto it = phones_.find(name);
  if (it == phones_.end()) fail(404, "no such phone: " + name);
  return it->second.host;
}

adaptor::AdaptorApi& World::adaptor_api(const std::string& name) {
  auto it = phones_.find(name);
  if (it == phones_.end()) fail(404, "no such phone: " + name);
  return *it->second.adaptor;
}

void World::step() {
  clock_.advance(config_.step);
  network_->deliver_due();
  for (const auto& ip : host_order_) hosts_.at(ip).adaptor->tick();
  for (const auto& name : phone_order_) phones_.at(name).phone->pump();
  if (clock_.now() >= next_reap_) {
    service_->reap();
    next_reap_ += std::chrono::seconds(1);
  }
}

void World::run_for(Millis duration) {
  const auto until = clock_.now() + duration;
  while (clock_.now() < until) step();
}

bool World::run_until(const std::function<bool()>& done, Millis timeout) {
  const auto until = clock_.now() + timeout;
  while (!done()) {
    if (clock_.now() >= until) return false;
    step();
  }
  return true;
}

}  // namespace webcomm::sim
