#include "webcomm/adaptor/adaptor.hpp"
#include "webcomm/adaptor/api.hpp"
#include "webcomm/adaptor/approval.hpp"
#include "webcomm/adaptor/http_server.hpp"
#include "webcomm/core/error.hpp"
#include "webcomm/sdk/phone.hpp"
#include "webcomm/signaling/api.hpp"
#include "webcomm/signaling/http_server.hpp"
#include "webcomm/signaling/service.hpp"
#include "webcomm/signaling/store.hpp"
#include "webcomm/sim/scenario.hpp"
#include "webcomm/sip/gateway.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

using namespace webcomm;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

std::pair<std::string, int> split_host_port(const std::string& text, int default_port) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) return {text, default_port};
  return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
}

int cmd_serve(const std::string& listen, const std::string& store_spec, const std::string& secret) {
  std::unique_ptr<signaling::Store> store;
  if (store_spec == "memory") {
    store = std::make_unique<signaling::MemoryStore>();
  } else if (store_spec.rfind("file:", 0) == 0) {
    store = std::make_unique<signaling::FileStore>(store_spec.substr(5));
  } else {
    std::cerr << "unknown store: " << store_spec << " (memory | file:PATH)\n";
    return 2;
  }
  SystemClock clock;
  signaling::ServiceConfig cfg;
  cfg.shared_secret = secret;
  signaling::SignalingService service(clock, std::move(store), std::make_unique<signaling::SequentialIds>(), cfg);
  signaling::SignalingHttpServer server(service);
  auto [host, port] = split_host_port(listen, 8080);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "cannot listen on " << listen << "\n";
    return 2;
  }
  server.start();
  spdlog::info("signaling server on http://{}:{}", host, bound);
  wait_for_signal();
  server.stop();
  return 0;
}

std::unique_ptr<adaptor::ApprovalPolicy> make_policy(const std::string& spec) {
  if (spec == "prompt") return std::make_unique<adaptor::PromptPolicy>(std::cin, std::cerr);
  if (spec == "allow" || spec == "allow-once" || spec == "allow-always" || spec == "deny") {
    return std::make_unique<adaptor::StaticPolicy>(adaptor::decision_from_string(spec));
  }
  return std::make_unique<adaptor::RulePolicy>(adaptor::RulePolicy::from_file(spec));
}

int cmd_adaptor(const std::string& listen, const std::string& policy_spec, const std::string& token_file,
                const std::string& widgets, const std::string& reflector) {
  SystemClock clock;
  SystemNetwork network;
  std::unique_ptr<adaptor::ApprovalPolicy> policy;
  try {
    policy = make_policy(policy_spec);
  } catch (const std::exception& e) {
    std::cerr << "bad policy: " << e.what() << "\n";
    return 2;
  }
  adaptor::AdaptorConfig cfg;
  if (!token_file.empty()) cfg.token_file = token_file;
  if (!reflector.empty()) {
    cfg.reflector = Endpoint::parse(reflector);
    if (!cfg.reflector) {
      std::cerr << "bad reflector address: " << reflector << "\n";
      return 2;
    }
  }
  adaptor::Adaptor core(network, clock, *policy, cfg);
  std::optional<std::filesystem::path> widgets_dir;
  if (!widgets.empty()) widgets_dir = widgets;
  adaptor::AdaptorHttpServer server(core, widgets_dir);
  auto [host, port] = split_host_port(listen, 9191);
  int bound = -1;
  try {
    bound = server.bind(host, port);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (bound < 0) {
    std::cerr << "cannot listen on " << listen << "\n";
    return 2;
  }
  core.start();
  server.start();
  spdlog::info("adaptor on http://{}:{}", host, bound);
  wait_for_signal();
  server.stop();
  core.stop();
  return 0;
}

int cmd_gateway(const std::string& registrar, const std::string& public_ip, const std::string& rest_server,
                int sip_port, const std::string& next_hop, const std::vector<std::string>& aors,
                const std::string& secret) {
  SystemClock clock;
  SystemNetwork network;
  sip::GatewayConfig cfg;
  auto reg = Endpoint::parse(registrar);
  if (!reg) {
    std::cerr << "bad registrar address: " << registrar << "\n";
    return 2;
  }
  cfg.registrar = *reg;
  cfg.next_hop = next_hop.empty() ? *reg : Endpoint::parse(next_hop).value_or(*reg);
  cfg.public_ip = public_ip;
  cfg.sip_port = static_cast<std::uint16_t>(sip_port);
  cfg.secret = secret;
  auto rest = [rest_server] { return std::make_unique<signaling::HttpSignaling>(rest_server); };
  try {
    sip::Gateway gateway(rest, network, clock, cfg);
    for (const auto& aor : aors) {
      gateway.login(aor, -1, [aor](int status, const json&) { spdlog::info("{} registered: {}", aor, status); });
    }
    gateway.start();
    spdlog::info("gateway on udp {}:{} -> {}", public_ip, sip_port, rest_server);
    wait_for_signal();
    gateway.stop();
  } catch (const ApiError& e) {
    std::cerr << "gateway: " << e.status() << " " << e.what() << "\n";
    return 2;
  }
  return 0;
}

void print_stats(const std::string& who, const json& stats) {
  auto frames = [&](const char* part) { return stats.contains(part) ? stats[part].value("frames", 0) : 0; };
  auto gaps = stats.contains("speaker") ? stats["speaker"].value("gaps", 0) : 0;
  std::cout << who << ": mic " << frames("mic") << " frames, speaker " << frames("speaker") << " frames, "
            << gaps << " gaps\n";
}

int cmd_call(const std::string& from, const std::string& to, const std::string& server, const std::string& adaptor_a,
             const std::string& adaptor_b, int seconds, const std::string& secret) {
  SystemClock clock;
  signaling::HttpSignaling sig_a(server), sig_b(server);
  adaptor::HttpAdaptor api_a(adaptor_a), api_b(adaptor_b);
  for (auto* api : {&api_a, &api_b}) {
    try {
      api->authenticate("webcomm-cli", std::nullopt);
    } catch (const ApiError& e) {
      if (e.status() == 503) {
        std::cerr << sdk::kInstallHint << "\n";
        return 2;
      }
      std::cerr << "adaptor refused: " << e.status() << " " << e.what() << "\n";
      return 2;
    }
  }
  sdk::PhoneConfig ca, cb;
  ca.aor = from;
  cb.aor = to;
  ca.secret = cb.secret = secret;
  ca.app_id = cb.app_id = "webcomm-cli";
  cb.tone_hz = 660.0;
  try {
    sdk::Phone a(sig_a, api_a, clock, ca);
    sdk::Phone b(sig_b, api_b, clock, cb);
    auto pump = [&] {
      a.pump();
      b.pump();
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    };
    a.login();
    b.login();
    const auto deadline = clock.now() + std::chrono::seconds(10);
    while (!(a.online() && b.online() && a.media_ready())) {
      if (clock.now() > deadline) {
        std::cerr << "login timed out: " << to_string(a.login_state().state()) << " "
                  << a.login_state().reason() << " / " << to_string(b.login_state().state()) << " "
                  << b.login_state().reason() << "\n";
        return 2;
      }
      pump();
    }
    b.on_state([&](const sdk::Phone::Handle& h, sdk::CallState s, const std::string&) {
      if (s == sdk::CallState::Invited) b.accept(h);
    });
    const auto call = a.place_call(to);
    std::cout << from << " calling " << to << "\n";
    auto last = a.call(call).state();
    std::signal(SIGINT, on_signal);
    const auto end = clock.now() + std::chrono::seconds(seconds);
    auto next_print = clock.now() + std::chrono::seconds(1);
    while (!g_stop && clock.now() < end && !a.call(call).terminal()) {
      pump();
      if (a.call(call).state() != last) {
        last = a.call(call).state();
        std::cout << "state: " << to_string(last) << "\n";
      }
      if (clock.now() >= next_print && last == sdk::CallState::InCall) {
        print_stats(from, a.media_stats(call));
        if (auto inc = b.calls(); !inc.empty()) print_stats(to, b.media_stats(inc.back()));
        next_print += std::chrono::seconds(1);
      }
    }
    const auto& sm = a.call(call);
    if (sm.terminal()) {
      std::cout << "call " << to_string(sm.state()) << ": " << sm.reason() << "\n";
      a.logout();
      b.logout();
      return sm.state() == sdk::CallState::Failed ? 1 : 0;
    }
    a.hangup(call);
    for (int i = 0; i < 20; ++i) pump();
    a.logout();
    b.logout();
    std::cout << "hung up\n";
  } catch (const ApiError& e) {
    std::cerr << "call: " << e.status() << " " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cmd_scenario(const std::string& file) {
  try {
    const auto report = sim::run_scenario_file(file);
    std::cout << report.json.dump(2) << "\n";
    return report.exit_code();
  } catch (const sim::ScenarioError& e) {
    std::cerr << "scenario: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "scenario: infrastructure failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"webcomm: REST signaling, host adaptor, SIP gateway and scenario harness"};
  app.require_subcommand(1);

  std::string listen = "127.0.0.1:8080", store = "memory", secret = "webcomm";
  auto* serve = app.add_subcommand("serve", "Run the signaling server");
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--store", store, "memory | file:PATH");
  serve->add_option("--secret", secret, "Shared login secret");

  std::string a_listen = "127.0.0.1:9191", policy = "prompt", token_file, widgets, reflector;
  auto* adaptor_cmd = app.add_subcommand("adaptor", "Run the host adaptor");
  adaptor_cmd->add_option("--listen", a_listen, "Loopback host:port");
  adaptor_cmd->add_option("--policy", policy, "prompt | allow | allow-always | deny | rules JSON file");
  adaptor_cmd->add_option("--token-file", token_file, "Where permanent tokens are kept");
  adaptor_cmd->add_option("--widgets", widgets, "Directory served under /widgets/");
  adaptor_cmd->add_option("--reflector", reflector, "Address-discovery service host:port");

  std::string registrar, public_ip = "127.0.0.1", rest_server = "http://127.0.0.1:8080", next_hop;
  int sip_port = 5060;
  std::vector<std::string> aors;
  auto* gateway = app.add_subcommand("gateway", "Run the REST/SIP gateway");
  gateway->add_option("--registrar", registrar, "SIP registrar host:port")->required();
  gateway->add_option("--public-ip", public_ip, "Address put in Contact and SDP");
  gateway->add_option("--rest-server", rest_server, "Signaling server URL");
  gateway->add_option("--sip-port", sip_port, "Local SIP UDP port");
  gateway->add_option("--next-hop", next_hop, "Where INVITEs go (default: registrar)");
  gateway->add_option("--aor", aors, "SIP users to register and bridge");
  gateway->add_option("--secret", secret, "Shared login secret");

  std::string from, to, server = "http://127.0.0.1:8080", adaptor_a = "http://127.0.0.1:9191",
                        adaptor_b = "http://127.0.0.1:9192";
  int seconds = 30;
  auto* call = app.add_subcommand("call", "Two-party tone call between two local adaptors");
  call->add_option("from", from, "Caller address-of-record")->required();
  call->add_option("to", to, "Callee address-of-record")->required();
  call->add_option("--server", server, "Signaling server URL");
  call->add_option("--from-adaptor", adaptor_a, "Caller's adaptor URL");
  call->add_option("--to-adaptor", adaptor_b, "Callee's adaptor URL");
  call->add_option("--seconds", seconds, "Call duration");
  call->add_option("--secret", secret, "Shared login secret");

  std::string file;
  auto* scenario = app.add_subcommand("scenario", "Run a scripted scenario on the simulator");
  scenario->add_option("file", file, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*serve) return cmd_serve(listen, store, secret);
  if (*adaptor_cmd) return cmd_adaptor(a_listen, policy, token_file, widgets, reflector);
  if (*gateway) return cmd_gateway(registrar, public_ip, rest_server, sip_port, next_hop, aors, secret);
  if (*call) return cmd_call(from, to, server, adaptor_a, adaptor_b, seconds, secret);
  if (*scenario) return cmd_scenario(file);
  return 2;
}
