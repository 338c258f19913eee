#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <variant>

#include "xrteleop/streaming.hpp"

namespace xrt {
namespace {

constexpr std::size_t kMaxQueuedErrors = 256;

struct Received {
  TrackingPacket packet;
  std::int64_t received_ns = 0;
};

using Event = std::variant<Received, Error>;

}  // namespace

struct Subscriber::Impl {
  SubscriberOptions options;
  std::unique_ptr<FrameClient> client;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Event> events;
  bool stopping = false;
  std::optional<std::uint64_t> last_sequence;  // network thread only
  std::atomic<std::uint64_t> delivered{0};
  std::atomic<std::uint64_t> dropped{0};
  std::thread dispatcher;

  void push_packet(Received r) {
    {
      std::lock_guard lock(mutex);
      if (!events.empty() && std::holds_alternative<Received>(events.back())) {
        events.back() = std::move(r);
        dropped.fetch_add(1);
      } else {
        events.emplace_back(std::move(r));
      }
    }
    cv.notify_one();
  }

  void push_error(const Error& e) {
    {
      std::lock_guard lock(mutex);
      std::size_t errors = 0;
      for (const auto& ev : events) errors += std::holds_alternative<Error>(ev) ? 1 : 0;
      if (errors >= kMaxQueuedErrors) return;
      events.emplace_back(e);
    }
    cv.notify_one();
  }

  void on_frame(std::string body) {
    const std::int64_t now = wall_clock_ns();
    if (options.on_raw) {
      try {
        options.on_raw(body, now);
      } catch (const Error& e) {
        push_error(e);
      } catch (const std::exception& e) {
        push_error(Error(ErrorCode::InvalidArgument, e.what()));
      }
    }
    try {
      TrackingPacket packet = decode_packet(body, last_sequence);
      last_sequence = packet.sequence;
      push_packet({std::move(packet), now});
    } catch (const Error& e) {
      push_error(e);
    }
  }

  void run() {
    for (;;) {
      Event event = Error(ErrorCode::InvalidArgument, "");
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [this] { return stopping || !events.empty(); });
        if (stopping) return;
        event = std::move(events.front());
        events.pop_front();
      }
      if (auto* r = std::get_if<Received>(&event)) {
        delivered.fetch_add(1);
        if (options.on_packet) options.on_packet(r->packet, r->received_ns);
      } else if (options.on_error) {
        options.on_error(std::get<Error>(event));
      }
    }
  }
};

Subscriber::Subscriber(SubscriberOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->dispatcher = std::thread([impl = impl_.get()] { impl->run(); });
  FrameClient::Options client;
  client.endpoint = impl_->options.endpoint;
  client.backoff = impl_->options.backoff;
  client.on_frame = [impl = impl_.get()](std::string body) { impl->on_frame(std::move(body)); };
  // A restarted publisher begins a new sequence.
  client.on_connect = [impl = impl_.get()] { impl->last_sequence.reset(); };
  client.on_error = [impl = impl_.get()](const Error& e) { impl->push_error(e); };
  impl_->client = std::make_unique<FrameClient>(std::move(client));
}

Subscriber::~Subscriber() { stop(); }

bool Subscriber::connected() const { return impl_->client->connected(); }
bool Subscriber::failed() const { return impl_->client->failed(); }
std::uint64_t Subscriber::delivered() const { return impl_->delivered.load(); }
std::uint64_t Subscriber::dropped() const { return impl_->dropped.load(); }

void Subscriber::stop() {
  impl_->client->stop();
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopping) return;
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  if (impl_->dispatcher.joinable()) impl_->dispatcher.join();
}

std::unique_ptr<Subscriber> subscribe(const Endpoint& endpoint,
                                      std::function<void(const TrackingPacket&, std::int64_t)> on_packet,
                                      std::function<void(const Error&)> on_error) {
  SubscriberOptions options;
  options.endpoint = endpoint;
  options.on_packet = std::move(on_packet);
  options.on_error = std::move(on_error);
  return std::make_unique<Subscriber>(std::move(options));
}

}  // namespace xrt
