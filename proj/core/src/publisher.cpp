#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "xrteleop/streaming.hpp"

namespace xrt {

std::int64_t wall_clock_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void StreamConfig::validate() const {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw Error(ErrorCode::InvalidArgument, "rate_hz must be positive");
  }
  if (max_clients == 0) throw Error(ErrorCode::InvalidArgument, "max_clients must be at least 1");
}

struct Publisher::Impl {
  StreamConfig config;
  PacketSource source;
  std::unique_ptr<FrameServer> server;
  std::atomic<std::uint64_t> published{0};
  std::atomic<std::uint64_t> failures{0};
  std::mutex mutex;
  std::condition_variable cv;
  bool stopping = false;
  std::thread thread;

  void run() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / config.rate_hz));
    std::uint64_t sequence = 0;
    auto next = clock::now();
    for (;;) {
      {
        std::unique_lock lock(mutex);
        if (cv.wait_until(lock, next, [this] { return stopping; })) return;
      }
      next += period;
      // Far behind schedule (suspended process): resynchronise instead of bursting.
      if (clock::now() - next > std::chrono::seconds(1)) next = clock::now() + period;

      std::optional<TrackingPacket> packet;
      try {
        packet = source();
      } catch (const std::exception& e) {
        spdlog::warn("publisher: source failed: {}", e.what());
        continue;
      }
      if (!packet) continue;
      packet->sequence = sequence;
      packet->timestamp_ns = wall_clock_ns();
      std::string body;
      try {
        body = encode_packet(*packet);
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        spdlog::warn("publisher: SerializationFailure for sequence {}: {}", sequence, e.what());
        continue;
      }
      ++sequence;
      server->broadcast(std::move(body));
      published.fetch_add(1);
    }
  }
};

Publisher::Publisher(StreamConfig config, PacketSource source) : impl_(std::make_unique<Impl>()) {
  config.validate();
  if (!source) throw Error(ErrorCode::InvalidArgument, "publisher needs a packet source");
  impl_->config = std::move(config);
  impl_->source = std::move(source);
  FrameServer::Options options;
  options.bind = impl_->config.bind;
  options.max_clients = impl_->config.max_clients;
  impl_->server = std::make_unique<FrameServer>(std::move(options));
  impl_->thread = std::thread([impl = impl_.get()] { impl->run(); });
}

Publisher::~Publisher() { stop(); }

std::uint16_t Publisher::port() const { return impl_->server->port(); }
std::uint64_t Publisher::published() const { return impl_->published.load(); }
std::uint64_t Publisher::encode_failures() const { return impl_->failures.load(); }
std::size_t Publisher::client_count() const { return impl_->server->client_count(); }
std::uint64_t Publisher::dropped() const { return impl_->server->dropped(); }

void Publisher::stop() {
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopping) return;
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->server->stop();
}

std::unique_ptr<Publisher> publish(PacketSource source, StreamConfig config) {
  return std::make_unique<Publisher>(std::move(config), std::move(source));
}

}  // namespace xrt
