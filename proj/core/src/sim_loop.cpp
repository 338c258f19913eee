#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "xrteleop/simrobot.hpp"
#include "xrteleop/streaming.hpp"

namespace xrt {
namespace {

struct Arrival {
  std::int64_t at_ns = 0;
  TrackingPacket packet;
};

std::int64_t period_ns(double rate_hz) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw Error(ErrorCode::InvalidArgument, "control rate must be positive");
  return std::llround(1e9 / rate_hz);
}

/// One control tick on `packet`; solver and integration errors are counted,
/// never fatal.
StepResult control_tick(const TrackingPacket& packet, TeleopState& teleop, SimState& sim, const TeleopConfig& config,
                        double dt) {
  teleop.q = sim.chains;
  StepResult result = step(packet, teleop, config);
  teleop = result.state;
  try {
    sim = sim_step(sim, result.commands, dt, config.chains);
  } catch (const Error& e) {
    result.failures.push_back({"sim", e.code(), e.what()});
  }
  return result;
}

}  // namespace

OfflineResult run_offline(const TeleopConfig& config, const std::vector<SessionEntry>& session,
                          const OfflineOptions& options) {
  const std::int64_t period = period_ns(options.control_rate_hz);
  const double dt = static_cast<double>(period) * 1e-9;
  OfflineResult result;

  std::optional<NetworkChannel> channel;
  if (options.network) channel.emplace(*options.network);
  std::vector<Arrival> arrivals;
  const std::int64_t t_first = session.empty() ? 0 : session.front().received_ns;
  for (const auto& entry : session) {
    TrackingPacket packet;
    try {
      packet = decode_packet(entry.frame);
    } catch (const Error&) {
      ++result.undecodable;
      continue;
    }
    std::int64_t delay = 0;
    if (channel) {
      const auto d = channel->next_delay_ns();
      if (!d) {
        ++result.dropped;
        continue;
      }
      delay = *d;
    }
    arrivals.push_back({entry.received_ns - t_first + delay, std::move(packet)});
  }
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const Arrival& a, const Arrival& b) { return a.at_ns < b.at_ns; });

  const std::int64_t end_ns =
      (arrivals.empty() ? 0 : arrivals.back().at_ns) + std::llround(options.tail_s * 1e9);
  SimState sim = options.initial_state ? *options.initial_state : SimState::initial(config);
  TeleopState teleop = TeleopState::initial(config);
  std::optional<TrackingPacket> current;
  std::size_t next = 0;

  // Absolute schedule: rounding the period must not accumulate.
  const double exact_period = 1e9 / options.control_rate_hz;
  for (std::int64_t k = 0;; ++k) {
    const std::int64_t t = std::llround(static_cast<double>(k) * exact_period);
    if (t > end_ns) break;
    const std::int64_t t_next = std::llround(static_cast<double>(k + 1) * exact_period);
    const TrackingPacket* best = nullptr;
    for (; next < arrivals.size() && arrivals[next].at_ns <= t; ++next) {
      const TrackingPacket& p = arrivals[next].packet;
      if (current && p.sequence <= current->sequence) continue;
      if (best == nullptr || p.sequence > best->sequence) best = &p;
    }
    const bool fresh = best != nullptr;
    if (fresh) {
      current = *best;
      ++result.consumed;
    }
    StepResult sr;
    if (current) {
      sr = control_tick(*current, teleop, sim, config, dt);
      result.failures += sr.failures.size();
    }
    sim.time_ns = t_next;
    result.trace += state_to_json(sim);
    result.trace += '\n';
    result.states.push_back({sim.time_ns, episode_state(sim), current ? current->sequence : 0});
    result.commands.push_back({sim.time_ns, episode_command(config, sr.commands), 0});
    ++result.ticks;
    if (options.on_tick) options.on_tick({sim.time_ns, current ? &*current : nullptr, fresh, &sr, &sim});
  }
  result.final_state = sim;
  return result;
}

struct SimService::Impl {
  TeleopConfig config;
  ServiceOptions options;
  std::unique_ptr<FrameServer> ingress;
  std::unique_ptr<FrameServer> state_server;
  std::unique_ptr<Subscriber> subscriber;
  std::unique_ptr<SessionWriter> session;
  std::unique_ptr<EpisodeRecorder> recorder;
  std::ofstream trace;

  std::mutex inbox_mutex;
  std::optional<NetworkChannel> channel;
  std::vector<Arrival> inbox;
  bool reset_sequence = false;

  mutable std::mutex state_mutex;
  SimState sim;

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;
  std::atomic<std::uint64_t> ticks{0};
  std::atomic<std::uint64_t> consumed{0};
  std::thread control;

  void ingest(std::string_view body, std::int64_t received_ns) {
    if (session) {
      try {
        session->append(received_ns, body);
      } catch (const Error& e) {
        spdlog::warn("session recorder: {}", e.what());
      }
    }
    TrackingPacket packet;
    try {
      packet = decode_packet(body);
    } catch (const Error& e) {
      spdlog::warn("dropping tracking frame: {}", e.what());
      return;
    }
    accept(std::move(packet), received_ns);
  }

  void accept(TrackingPacket packet, std::int64_t received_ns) {
    std::lock_guard lock(inbox_mutex);
    std::int64_t delay = 0;
    if (channel) {
      const auto d = channel->next_delay_ns();
      if (!d) return;
      delay = *d;
    }
    inbox.push_back({received_ns + delay, std::move(packet)});
  }

  void run() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::nanoseconds(period_ns(options.control_rate_hz));
    const double dt = static_cast<double>(period.count()) * 1e-9;
    TeleopState teleop = TeleopState::initial(config);
    std::optional<TrackingPacket> current;
    const double exact_period = 1e9 / options.control_rate_hz;
    const auto start = clock::now();
    auto next = start;
    for (std::int64_t k = 1;; ++k) {
      {
        std::unique_lock lock(stop_mutex);
        if (stop_cv.wait_until(lock, next, [this] { return stopping; })) return;
      }
      next = start + std::chrono::nanoseconds(std::llround(static_cast<double>(k) * exact_period));
      const std::int64_t now = wall_clock_ns();

      const TrackingPacket* best = nullptr;
      std::optional<TrackingPacket> taken;
      {
        std::lock_guard lock(inbox_mutex);
        if (reset_sequence) {
          current.reset();
          reset_sequence = false;
        }
        for (const auto& a : inbox) {
          if (a.at_ns > now) continue;
          if (current && a.packet.sequence <= current->sequence) continue;
          if (best == nullptr || a.packet.sequence > best->sequence) best = &a.packet;
        }
        if (best) taken = *best;
        std::erase_if(inbox, [now](const Arrival& a) { return a.at_ns <= now; });
      }
      if (taken) {
        current = std::move(taken);
        consumed.fetch_add(1);
      }

      SimState snapshot;
      StepResult sr;
      {
        std::lock_guard lock(state_mutex);
        if (current) {
          sr = control_tick(*current, teleop, sim, config, dt);
          for (const auto& f : sr.failures) spdlog::debug("{}: {}", f.source, f.message);
        }
        sim.time_ns = std::llround(static_cast<double>(k) * exact_period);
        snapshot = sim;
      }
      ticks.fetch_add(1);
      const std::string line = state_to_json(snapshot);
      if (ingress) ingress->broadcast(line);
      if (state_server) state_server->broadcast(line);
      if (trace.is_open()) trace << line << '\n';
      if (recorder) {
        try {
          recorder->update_state(episode_state(snapshot), current ? current->sequence : 0);
          recorder->update_command(episode_command(config, sr.commands));
        } catch (const Error& e) {
          spdlog::warn("episode recorder: {}", e.what());
        }
      }
    }
  }
};

SimService::SimService(TeleopConfig config, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  config.validate();
  period_ns(options.control_rate_hz);
  if (!options.listen && !options.subscribe) {
    throw Error(ErrorCode::InvalidArgument, "service needs a listen or subscribe endpoint");
  }
  Impl& s = *impl_;
  s.config = std::move(config);
  s.options = std::move(options);
  s.sim = SimState::initial(s.config);
  if (s.options.network) s.channel.emplace(*s.options.network);
  if (s.options.session_path) s.session = std::make_unique<SessionWriter>(*s.options.session_path);
  if (s.options.trace_path) {
    s.trace.open(*s.options.trace_path);
    if (!s.trace) throw Error(ErrorCode::InvalidArgument, "cannot write " + *s.options.trace_path);
  }
  if (s.options.episode_path) {
    s.recorder = std::make_unique<EpisodeRecorder>(s.options.task, 50.0);
    s.recorder->start();
  }
  if (s.options.state_bind) {
    FrameServer::Options o;
    o.bind = *s.options.state_bind;
    s.state_server = std::make_unique<FrameServer>(std::move(o));
  }
  if (s.options.listen) {
    FrameServer::Options o;
    o.bind = *s.options.listen;
    o.on_frame = [impl = impl_.get()](FrameServer::ClientId, std::string body) { impl->ingest(body, wall_clock_ns()); };
    o.on_connect = [impl = impl_.get()](FrameServer::ClientId id) {
      spdlog::info("tracking client {} connected", id);
      std::lock_guard lock(impl->inbox_mutex);
      impl->reset_sequence = true;
    };
    s.ingress = std::make_unique<FrameServer>(std::move(o));
  }
  if (s.options.subscribe) {
    SubscriberOptions o;
    o.endpoint = *s.options.subscribe;
    o.on_raw = [impl = impl_.get()](std::string_view body, std::int64_t received_ns) {
      if (impl->session) impl->session->append(received_ns, body);
    };
    o.on_packet = [impl = impl_.get()](const TrackingPacket& p, std::int64_t received_ns) {
      impl->accept(p, received_ns);
    };
    o.on_error = [](const Error& e) { spdlog::warn("tracking stream: {}", e.what()); };
    s.subscriber = std::make_unique<Subscriber>(std::move(o));
  }
  s.control = std::thread([impl = impl_.get()] { impl->run(); });
}

SimService::~SimService() {
  try {
    stop();
  } catch (const std::exception& e) {
    spdlog::error("sim service shutdown: {}", e.what());
  }
}

std::optional<std::uint16_t> SimService::listen_port() const {
  if (!impl_->ingress) return std::nullopt;
  return impl_->ingress->port();
}

std::optional<std::uint16_t> SimService::state_port() const {
  if (!impl_->state_server) return std::nullopt;
  return impl_->state_server->port();
}

SimState SimService::state() const {
  std::lock_guard lock(impl_->state_mutex);
  return impl_->sim;
}

std::uint64_t SimService::ticks() const { return impl_->ticks.load(); }
std::uint64_t SimService::packets_consumed() const { return impl_->consumed.load(); }

void SimService::stop() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    if (impl_->stopping) return;
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  if (impl_->subscriber) impl_->subscriber->stop();
  if (impl_->ingress) impl_->ingress->stop();
  if (impl_->control.joinable()) impl_->control.join();
  if (impl_->state_server) impl_->state_server->stop();
  if (impl_->session) impl_->session->close();
  if (impl_->trace.is_open()) impl_->trace.close();
  if (impl_->recorder) {
    const EpisodeRecord record = impl_->recorder->finish();
    save_episode(record, *impl_->options.episode_path);
  }
}

}  // namespace xrt
