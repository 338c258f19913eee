// xrteleop: operational entry point for the simulated robot, the tracking
// stream recorder and the latency bench.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "xrteleop/episode.hpp"
#include "xrteleop/error.hpp"
#include "xrteleop/fixtures.hpp"
#include "xrteleop/latency.hpp"
#include "xrteleop/protocol.hpp"
#include "xrteleop/session.hpp"
#include "xrteleop/simrobot.hpp"
#include "xrteleop/streaming.hpp"
#include "xrteleop/teleop.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

/// Sleeps until SIGINT/SIGTERM or until `seconds` elapse (0 = forever).
void wait_for(double seconds) {
  const auto deadline = Clock::now() + std::chrono::duration<double>(seconds);
  while (!g_interrupted && (seconds <= 0.0 || Clock::now() < deadline)) std::this_thread::sleep_for(20ms);
}

std::optional<xrt::NetworkEmulation> emulation(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  return xrt::NetworkEmulation::parse(spec);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw xrt::Error(xrt::ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string config = "data/config/teleop.json";
  std::string listen = "ws://0.0.0.0:9090/";
  std::string subscribe;
  std::string state;
  std::string ui;
  int http_port = 8080;
  std::string emulate;
  std::string session;
  std::string episode;
  std::string trace;
  double rate = 90.0;
  double duration = 0.0;
};

int serve(const ServeArgs& a) {
  xrt::ServiceOptions o;
  if (!a.listen.empty()) o.listen = xrt::Endpoint::parse(a.listen);
  if (!a.subscribe.empty()) o.subscribe = xrt::Endpoint::parse(a.subscribe);
  if (!a.state.empty()) o.state_bind = xrt::Endpoint::parse(a.state);
  o.control_rate_hz = a.rate;
  o.network = emulation(a.emulate);
  if (!a.session.empty()) o.session_path = a.session;
  if (!a.episode.empty()) o.episode_path = a.episode;
  if (!a.trace.empty()) o.trace_path = a.trace;

  xrt::SimService service(xrt::load_teleop_config(a.config), o);
  if (auto p = service.listen_port()) spdlog::info("tracking + state on port {}", *p);
  if (auto p = service.state_port()) spdlog::info("state stream on port {}", *p);

  std::unique_ptr<httplib::Server> http;
  std::thread http_thread;
  if (!a.ui.empty()) {
    http = std::make_unique<httplib::Server>();
    if (!http->set_mount_point("/", a.ui)) {
      throw xrt::Error(xrt::ErrorCode::InvalidArgument, "ui directory not found: " + a.ui);
    }
    if (!http->bind_to_port("0.0.0.0", a.http_port)) {
      throw xrt::Error(xrt::ErrorCode::BindFailure, "cannot bind http port " + std::to_string(a.http_port));
    }
    spdlog::info("serving {} on http://0.0.0.0:{}/", a.ui, a.http_port);
    http_thread = std::thread([&] { http->listen_after_bind(); });
  }

  wait_for(a.duration);
  if (http) {
    http->stop();
    http_thread.join();
  }
  service.stop();
  spdlog::info("{} ticks, {} packets consumed", service.ticks(), service.packets_consumed());
  return 0;
}

// ---------------------------------------------------------------- replay

struct ReplayArgs {
  std::string session;
  std::string config = "data/config/teleop.json";
  std::string emulate;
  std::string trace;
  std::string episode;
  std::string publish;
  double rate = 90.0;
};

int replay(const ReplayArgs& a) {
  const auto entries = xrt::load_session(a.session);

  if (!a.publish.empty()) {
    // Re-stream the recorded packets; the publisher restamps sequence and time.
    std::vector<xrt::TrackingPacket> packets;
    for (const auto& e : entries) {
      try {
        packets.push_back(xrt::decode_packet(e.frame));
      } catch (const xrt::Error& err) {
        spdlog::warn("skipping entry: {}", err.what());
      }
    }
    std::atomic<std::size_t> next{0};
    xrt::StreamConfig cfg;
    cfg.bind = xrt::Endpoint::parse(a.publish);
    cfg.rate_hz = a.rate;
    xrt::Publisher pub(cfg, [&]() -> std::optional<xrt::TrackingPacket> {
      const std::size_t i = next.fetch_add(1);
      if (i >= packets.size()) return std::nullopt;
      return packets[i];
    });
    spdlog::info("publishing {} packets on port {}", packets.size(), pub.port());
    while (!g_interrupted && next.load() < packets.size()) std::this_thread::sleep_for(20ms);
    pub.stop();
    return 0;
  }

  const xrt::TeleopConfig config = xrt::load_teleop_config(a.config);
  xrt::OfflineOptions o;
  o.control_rate_hz = a.rate;
  o.network = emulation(a.emulate);
  const xrt::OfflineResult r = xrt::run_offline(config, entries, o);
  if (a.trace.empty() || a.trace == "-") {
    std::cout << r.trace;
  } else {
    write_text(a.trace, r.trace);
  }
  if (!a.episode.empty()) {
    xrt::save_episode(xrt::record_episode(r.states, r.commands, 50.0, "replay"), a.episode);
  }
  spdlog::info("{} ticks, {} consumed, {} dropped, {} undecodable, {} step failures", r.ticks, r.consumed,
               r.dropped, r.undecodable, r.failures);
  return 0;
}

// ---------------------------------------------------------------- record

int record(const std::string& out, const std::string& from, double duration) {
  xrt::SessionWriter writer(out);
  xrt::SubscriberOptions o;
  o.endpoint = xrt::Endpoint::parse(from);
  o.on_raw = [&](std::string_view frame, std::int64_t rx) { writer.append(rx, frame); };
  o.on_error = [](const xrt::Error& e) { spdlog::warn("{}", e.what()); };
  xrt::Subscriber sub(o);
  wait_for(duration);
  sub.stop();
  writer.close();
  spdlog::info("{} frames written to {}", writer.written(), out);
  return 0;
}

// ---------------------------------------------------------------- bench-latency

int bench_latency(const std::string& spec, std::size_t samples, double rate) {
  xrt::NetworkChannel channel(xrt::NetworkEmulation::parse(spec));

  xrt::StreamConfig cfg;
  cfg.rate_hz = rate;
  xrt::Publisher pub(cfg, [] { return std::optional<xrt::TrackingPacket>(xrt::TrackingPacket{}); });

  // Relay holding each frame for its emulated delay, in delivery order.
  xrt::FrameServer relay(xrt::FrameServer::Options{});
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::pair<Clock::time_point, std::string>> held;
  bool done = false;
  std::thread forwarder([&] {
    std::unique_lock lock(m);
    while (!done) {
      if (held.empty()) {
        cv.wait(lock);
        continue;
      }
      auto it = std::min_element(held.begin(), held.end(),
                                 [](const auto& x, const auto& y) { return x.first < y.first; });
      if (Clock::now() < it->first) {
        cv.wait_until(lock, it->first);
        continue;
      }
      std::string body = std::move(it->second);
      held.erase(it);
      lock.unlock();
      relay.broadcast(std::move(body));
      lock.lock();
    }
  });

  xrt::SubscriberOptions in;
  in.endpoint.port = pub.port();
  in.on_raw = [&](std::string_view frame, std::int64_t) {
    const auto delay = channel.next_delay_ns();
    if (!delay) return;
    std::lock_guard lock(m);
    held.emplace_back(Clock::now() + std::chrono::nanoseconds(*delay), std::string(frame));
    cv.notify_one();
  };
  xrt::Subscriber upstream(in);

  xrt::LatencyMeter meter(samples);
  std::atomic<std::size_t> seen{0};
  xrt::SubscriberOptions out;
  out.endpoint.port = relay.port();
  out.on_packet = [&](const xrt::TrackingPacket& p, std::int64_t rx) {
    meter.add({p.sequence, p.timestamp_ns, rx});
    ++seen;
  };
  out.on_error = [](const xrt::Error& e) { spdlog::debug("{}", e.what()); };
  xrt::Subscriber downstream(out);

  while (!g_interrupted && seen.load() < samples) std::this_thread::sleep_for(10ms);
  upstream.stop();
  {
    std::lock_guard lock(m);
    done = true;
  }
  cv.notify_one();
  forwarder.join();
  downstream.stop();
  pub.stop();

  const xrt::LatencyReport r = meter.report();
  std::cout << "emulation  " << spec << "\n"
            << "samples    " << r.samples << "\n"
            << "mean_ms    " << r.mean_ms << "\n"
            << "std_ms     " << r.std_ms << "\n"
            << "p99_ms     " << r.p99_ms << "\n"
            << "loss       " << r.loss_fraction << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teleoperation stream tooling and kinematic robot simulator"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  ServeArgs sa;
  auto* s = app.add_subcommand("serve", "Run the teleop control loop against a live tracking stream");
  s->add_option("--config", sa.config, "Teleop configuration")->capture_default_str();
  s->add_option("--listen", sa.listen, "Accept tracking clients (ws:// or tcp://); empty disables")
      ->capture_default_str();
  s->add_option("--subscribe", sa.subscribe, "Pull tracking packets from a publisher");
  s->add_option("--state", sa.state, "Separate state-only endpoint");
  s->add_option("--ui", sa.ui, "Directory of static UI files to serve over HTTP");
  s->add_option("--http", sa.http_port, "HTTP port for --ui")->capture_default_str();
  s->add_option("--emulate", sa.emulate, "Network emulation, e.g. uniform:5:40,drop=0.2,seed=1");
  s->add_option("--record", sa.session, "Record incoming tracking frames to a session file");
  s->add_option("--episode", sa.episode, "Record a 50 Hz episode file");
  s->add_option("--trace", sa.trace, "Write one state line per tick");
  s->add_option("--rate", sa.rate, "Control rate in Hz")->capture_default_str();
  s->add_option("--duration", sa.duration, "Seconds to run; 0 runs until interrupted");

  ReplayArgs ra;
  auto* r = app.add_subcommand("replay", "Run the control loop offline over a recorded session");
  r->add_option("session", ra.session, "Session file")->required();
  r->add_option("--config", ra.config, "Teleop configuration")->capture_default_str();
  r->add_option("--emulate", ra.emulate, "Seeded network emulation");
  r->add_option("--trace", ra.trace, "Trace output file; '-' or empty for stdout");
  r->add_option("--episode", ra.episode, "Write a 50 Hz episode file");
  r->add_option("--publish", ra.publish, "Re-stream the packets on this endpoint instead");
  r->add_option("--rate", ra.rate, "Control or publish rate in Hz")->capture_default_str();

  std::string rec_out, rec_from = "ws://127.0.0.1:9090/";
  double rec_duration = 0.0;
  auto* c = app.add_subcommand("record", "Record a tracking stream to a session file");
  c->add_option("--out", rec_out, "Session file")->required();
  c->add_option("--from", rec_from, "Publisher endpoint")->capture_default_str();
  c->add_option("--duration", rec_duration, "Seconds; 0 records until interrupted");

  std::string bench_spec = "constant:0";
  std::size_t bench_samples = 900;
  double bench_rate = 90.0;
  auto* b = app.add_subcommand("bench-latency", "Loopback latency through an emulated network");
  b->add_option("--emulate", bench_spec, "Network emulation, e.g. constant:10 or uniform:5:40,drop=0.1")->capture_default_str();
  b->add_option("--samples", bench_samples, "Packets to measure")->capture_default_str();
  b->add_option("--rate", bench_rate, "Publish rate in Hz")->capture_default_str();

  std::string fx_out = "data/fixtures", fx_chains = "data/chains";
  auto* f = app.add_subcommand("export-fixtures", "Write golden packets, fuzz seeds and FK reference values");
  f->add_option("--out", fx_out, "Output directory")->capture_default_str();
  f->add_option("--chains", fx_chains, "Directory of chain descriptions")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*s) return serve(sa);
    if (*r) return replay(ra);
    if (*c) return record(rec_out, rec_from, rec_duration);
    if (*b) return bench_latency(bench_spec, bench_samples, bench_rate);
    if (*f) {
      xrt::write_fixtures(fx_out, fx_chains);
      return 0;
    }
  } catch (const xrt::Error& e) {
    std::cerr << "error [" << xrt::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
