#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "xrteleop/error.hpp"

namespace xrt {

enum class Transport {
  /// 4-byte big-endian length + UTF-8 body over TCP.
  TcpFramed,
  /// One websocket text message per body.
  WebSocket,
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  Transport transport = Transport::TcpFramed;
  std::string path = "/";

  /// Accepts "tcp://host:port" and "ws://host:port[/path]".
  static Endpoint parse(std::string_view uri);
  std::string to_string() const;
};

/// Reconnect delays: min(cap, base * 2^attempt).
struct BackoffPolicy {
  std::chrono::milliseconds base{100};
  std::chrono::milliseconds cap{5000};
  /// Consecutive failed connects before giving up; 0 retries forever.
  int max_attempts = 0;

  std::chrono::milliseconds delay(int attempt) const;
};

/// Accepts any number of clients (up to max_clients) and keeps a
/// latest-only outbound slot per client: a frame not yet written when the
/// next one arrives is replaced, never queued. All network work runs on a
/// single internal thread; callbacks fire on that thread, one at a time.
class FrameServer {
 public:
  using ClientId = std::uint64_t;

  struct Options {
    Endpoint bind;
    std::size_t max_clients = 16;
    std::function<void(ClientId, std::string)> on_frame;
    std::function<void(ClientId)> on_connect;
    std::function<void(ClientId)> on_disconnect;
  };

  /// Throws BindFailure.
  explicit FrameServer(Options options);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  /// Bound port; useful when binding port 0.
  std::uint16_t port() const;
  void broadcast(std::string body);
  void send(ClientId client, std::string body);
  std::size_t client_count() const;
  /// Frames replaced in a client slot before they could be written.
  std::uint64_t dropped() const;
  void stop();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Connects to a FrameServer and reconnects with exponential backoff after
/// failures or disconnects. Outbound frames use a latest-only slot.
class FrameClient {
 public:
  struct Options {
    Endpoint endpoint;
    BackoffPolicy backoff;
    std::function<void(std::string)> on_frame;
    std::function<void()> on_connect;
    std::function<void()> on_disconnect;
    /// ConnectFailure once retries are exhausted; BufferOverflow for
    /// oversized frames (the connection is then dropped and retried).
    std::function<void(const Error&)> on_error;
  };

  explicit FrameClient(Options options);
  ~FrameClient();
  FrameClient(const FrameClient&) = delete;
  FrameClient& operator=(const FrameClient&) = delete;

  void send(std::string body);
  bool connected() const;
  /// True once the retry budget is exhausted.
  bool failed() const;
  void stop();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace xrt
