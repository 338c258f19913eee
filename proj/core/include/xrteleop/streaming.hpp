#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>

#include "xrteleop/error.hpp"
#include "xrteleop/protocol.hpp"
#include "xrteleop/transport.hpp"

namespace xrt {

struct StreamConfig {
  Endpoint bind;
  double rate_hz = 90.0;
  std::size_t max_clients = 16;

  /// Throws InvalidArgument.
  void validate() const;
};

/// Called once per publisher tick. Returning nullopt skips the tick.
using PacketSource = std::function<std::optional<TrackingPacket>()>;

/// Emits one packet per tick on an absolute schedule. The publisher owns
/// `sequence` (0, 1, 2, ...) and stamps `timestamp_ns` with the system clock
/// at send time; whatever the source put there is overwritten.
class Publisher {
 public:
  /// Throws BindFailure or InvalidArgument.
  Publisher(StreamConfig config, PacketSource source);
  ~Publisher();
  Publisher(const Publisher&) = delete;
  Publisher& operator=(const Publisher&) = delete;

  std::uint16_t port() const;
  /// Packets handed to the transport so far.
  std::uint64_t published() const;
  /// Packets whose encoding failed (logged and skipped).
  std::uint64_t encode_failures() const;
  std::size_t client_count() const;
  std::uint64_t dropped() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Publisher> publish(PacketSource source, StreamConfig config);

struct SubscriberOptions {
  Endpoint endpoint;
  BackoffPolicy backoff;
  /// Invoked on a dedicated thread, one call at a time, in arrival order.
  /// `received_ns` is the system clock when the frame came off the socket.
  std::function<void(const TrackingPacket&, std::int64_t received_ns)> on_packet;
  std::function<void(const Error&)> on_error;
  /// Lossless tap on every raw frame, called on the network thread before
  /// decoding. Must be quick; exceptions are routed to on_error.
  std::function<void(std::string_view frame, std::int64_t received_ns)> on_raw;
};

/// Callback-driven consumer. Packets that arrive while the callback is busy
/// collapse into a single latest-only slot so a slow consumer always sees
/// the freshest packet on return.
class Subscriber {
 public:
  explicit Subscriber(SubscriberOptions options);
  ~Subscriber();
  Subscriber(const Subscriber&) = delete;
  Subscriber& operator=(const Subscriber&) = delete;

  bool connected() const;
  bool failed() const;
  std::uint64_t delivered() const;
  /// Packets replaced in the slot before the callback could see them.
  std::uint64_t dropped() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Subscriber> subscribe(const Endpoint& endpoint,
                                      std::function<void(const TrackingPacket&, std::int64_t)> on_packet,
                                      std::function<void(const Error&)> on_error = {});

/// System clock in nanoseconds since the epoch.
std::int64_t wall_clock_ns();

}  // namespace xrt
