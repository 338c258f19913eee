#include "xrteleop/transport.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "xrteleop/framing.hpp"

namespace xrt {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using error_code = boost::system::error_code;
using Payload = std::shared_ptr<const std::string>;

/// One connection, driven entirely from the io thread. Reads loop until
/// failure; writes go through a single in-flight buffer plus one pending
/// slot that newer frames overwrite.
class Session : public std::enable_shared_from_this<Session> {
 public:
  std::function<void(std::string)> on_frame;
  std::function<void()> on_open;
  std::function<void()> on_closed;
  std::function<void(const Error&)> on_error;
  std::atomic<std::uint64_t>* dropped = nullptr;

  virtual ~Session() = default;
  virtual void start() = 0;

  void deliver(Payload payload) {
    if (closed_) return;
    if (writing_) {
      if (pending_ && dropped) dropped->fetch_add(1, std::memory_order_relaxed);
      pending_ = std::move(payload);
      return;
    }
    writing_ = true;
    current_ = std::move(payload);
    do_write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    shutdown_socket();
  }

 protected:
  virtual void do_write() = 0;
  virtual void shutdown_socket() = 0;

  void opened() {
    if (on_open) on_open();
    flush();
  }

  void written(const error_code& ec) {
    if (ec) {
      fail();
      return;
    }
    flush();
  }

  void fail() {
    if (closed_) return;
    close();
    if (on_closed) on_closed();
  }

  void frame(std::string body) {
    if (!closed_ && on_frame) on_frame(std::move(body));
  }

  bool writing_ = false;
  Payload current_;

 private:
  void flush() {
    if (pending_) {
      current_ = std::move(pending_);
      pending_.reset();
      writing_ = true;
      do_write();
    } else {
      writing_ = false;
      current_.reset();
    }
  }

  bool closed_ = false;
  Payload pending_;
};

class TcpSession final : public Session {
 public:
  explicit TcpSession(tcp::socket socket) : socket_(std::move(socket)) {
    error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
  }

  void start() override {
    opened();
    read_header();
  }

 private:
  void read_header() {
    asio::async_read(socket_, asio::buffer(header_), [self = shared_from_this(), this](error_code ec, std::size_t) {
      if (ec) return fail();
      const std::uint32_t len = read_be32(header_.data());
      if (len > kMaxFrameBytes) {
        if (on_error) on_error(Error(ErrorCode::BufferOverflow, "incoming frame exceeds 1 MiB"));
        return fail();
      }
      body_.resize(len);
      asio::async_read(socket_, asio::buffer(body_), [self, this](error_code ec2, std::size_t) {
        if (ec2) return fail();
        frame(std::move(body_));
        body_.clear();
        read_header();
      });
    });
  }

  void do_write() override {
    asio::async_write(socket_, asio::buffer(*current_),
                      [self = shared_from_this(), this](error_code ec, std::size_t) { written(ec); });
  }

  void shutdown_socket() override {
    error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

  tcp::socket socket_;
  std::array<unsigned char, 4> header_{};
  std::string body_;
};

class WsSession final : public Session {
 public:
  WsSession(tcp::socket socket, bool server, std::string host, std::string path)
      : ws_(std::move(socket)), server_(server), host_(std::move(host)), path_(std::move(path)) {
    ws_.read_message_max(kMaxFrameBytes);
    error_code ec;
    beast::get_lowest_layer(ws_).set_option(tcp::no_delay(true), ec);
  }

  void start() override {
    // Hold writes until the handshake completes.
    writing_ = true;
    auto done = [self = shared_from_this(), this](error_code ec) {
      if (ec) return fail();
      ws_.text(true);
      opened();
      read();
    };
    if (server_) {
      ws_.async_accept(std::move(done));
    } else {
      ws_.async_handshake(host_, path_, std::move(done));
    }
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this(), this](error_code ec, std::size_t) {
      if (ec) {
        if (ec == websocket::error::message_too_big && on_error) {
          on_error(Error(ErrorCode::BufferOverflow, "incoming message exceeds 1 MiB"));
        }
        return fail();
      }
      std::string body = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      frame(std::move(body));
      read();
    });
  }

  void do_write() override {
    ws_.async_write(asio::buffer(*current_),
                    [self = shared_from_this(), this](error_code ec, std::size_t) { written(ec); });
  }

  void shutdown_socket() override {
    error_code ec;
    auto& sock = beast::get_lowest_layer(ws_);
    sock.shutdown(tcp::socket::shutdown_both, ec);
    sock.close(ec);
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  bool server_;
  std::string host_;
  std::string path_;
};

tcp::endpoint resolve(const Endpoint& ep, asio::io_context& io) {
  error_code ec;
  const auto address = asio::ip::make_address(ep.host, ec);
  if (!ec) return {address, ep.port};
  tcp::resolver resolver(io);
  const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
  if (ec || results.empty()) throw Error(ErrorCode::ConnectFailure, "cannot resolve host '" + ep.host + "'");
  return *results.begin();
}

Payload make_payload(Transport transport, std::string body) {
  if (transport == Transport::TcpFramed) return std::make_shared<const std::string>(encode_frame(body));
  if (body.size() > kMaxFrameBytes) throw Error(ErrorCode::BufferOverflow, "frame body exceeds 1 MiB");
  return std::make_shared<const std::string>(std::move(body));
}

}  // namespace

// ------------------------------------------------------------------ Endpoint

Endpoint Endpoint::parse(std::string_view uri) {
  Endpoint ep;
  std::string_view rest;
  if (uri.starts_with("tcp://")) {
    ep.transport = Transport::TcpFramed;
    rest = uri.substr(6);
  } else if (uri.starts_with("ws://")) {
    ep.transport = Transport::WebSocket;
    rest = uri.substr(5);
  } else {
    throw Error(ErrorCode::InvalidArgument, "endpoint must start with tcp:// or ws://: '" + std::string(uri) + "'");
  }
  const auto slash = rest.find('/');
  if (slash != std::string_view::npos) {
    ep.path = std::string(rest.substr(slash));
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "endpoint needs host:port");
  ep.host = std::string(rest.substr(0, colon));
  const std::string_view port = rest.substr(colon + 1);
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw Error(ErrorCode::InvalidArgument, "invalid port in '" + std::string(uri) + "'");
  }
  ep.port = static_cast<std::uint16_t>(value);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  return ep;
}

std::string Endpoint::to_string() const {
  std::string out = transport == Transport::TcpFramed ? "tcp://" : "ws://";
  out += host + ":" + std::to_string(port);
  if (transport == Transport::WebSocket && path != "/") out += path;
  return out;
}

std::chrono::milliseconds BackoffPolicy::delay(int attempt) const {
  auto d = base;
  for (int i = 0; i < attempt && d < cap; ++i) d *= 2;
  return std::min(d, cap);
}

// --------------------------------------------------------------- FrameServer

struct FrameServer::Impl {
  asio::io_context io;
  asio::executor_work_guard<asio::io_context::executor_type> guard{io.get_executor()};
  tcp::acceptor acceptor{io};
  Options options;
  std::map<ClientId, std::shared_ptr<Session>> sessions;
  ClientId next_id = 1;
  std::atomic<std::size_t> count{0};
  std::atomic<std::uint64_t> dropped{0};
  std::atomic<bool> stopped{false};
  std::thread thread;

  void accept() {
    acceptor.async_accept([this](error_code ec, tcp::socket socket) {
      if (ec == asio::error::operation_aborted || !acceptor.is_open()) return;
      if (!ec) admit(std::move(socket));
      accept();
    });
  }

  void admit(tcp::socket socket) {
    if (sessions.size() >= options.max_clients) {
      spdlog::warn("frame server: rejecting client, max_clients={} reached", options.max_clients);
      error_code ec;
      socket.close(ec);
      return;
    }
    const ClientId id = next_id++;
    std::shared_ptr<Session> session;
    if (options.bind.transport == Transport::TcpFramed) {
      session = std::make_shared<TcpSession>(std::move(socket));
    } else {
      session = std::make_shared<WsSession>(std::move(socket), true, "", "");
    }
    session->dropped = &dropped;
    session->on_frame = [this, id](std::string body) {
      if (options.on_frame) options.on_frame(id, std::move(body));
    };
    session->on_error = [id](const Error& e) { spdlog::warn("frame server: client {}: {}", id, e.what()); };
    session->on_closed = [this, id] {
      if (sessions.erase(id) > 0) {
        count.fetch_sub(1);
        if (options.on_disconnect) options.on_disconnect(id);
      }
    };
    sessions.emplace(id, session);
    count.fetch_add(1);
    if (options.on_connect) options.on_connect(id);
    session->start();
  }
};

FrameServer::FrameServer(Options options) : impl_(std::make_shared<Impl>()) {
  impl_->options = std::move(options);
  try {
    const tcp::endpoint ep(asio::ip::make_address(impl_->options.bind.host), impl_->options.bind.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::BindFailure, "cannot bind " + impl_->options.bind.to_string() + ": " + e.what());
  }
  impl_->accept();
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

FrameServer::~FrameServer() { stop(); }

std::uint16_t FrameServer::port() const {
  error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

void FrameServer::broadcast(std::string body) {
  if (impl_->stopped) return;
  Payload payload = make_payload(impl_->options.bind.transport, std::move(body));
  asio::post(impl_->io, [impl = impl_.get(), payload] {
    for (auto& [id, session] : impl->sessions) session->deliver(payload);
  });
}

void FrameServer::send(ClientId client, std::string body) {
  if (impl_->stopped) return;
  Payload payload = make_payload(impl_->options.bind.transport, std::move(body));
  asio::post(impl_->io, [impl = impl_.get(), client, payload] {
    auto it = impl->sessions.find(client);
    if (it != impl->sessions.end()) it->second->deliver(payload);
  });
}

std::size_t FrameServer::client_count() const { return impl_->count.load(); }

std::uint64_t FrameServer::dropped() const { return impl_->dropped.load(); }

void FrameServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    error_code ec;
    impl->acceptor.close(ec);
    auto sessions = std::move(impl->sessions);
    impl->sessions.clear();
    for (auto& [id, session] : sessions) session->close();
    impl->count = 0;
    impl->guard.reset();
    impl->io.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

// --------------------------------------------------------------- FrameClient

struct FrameClient::Impl {
  asio::io_context io;
  asio::executor_work_guard<asio::io_context::executor_type> guard{io.get_executor()};
  asio::steady_timer timer{io};
  Options options;
  std::shared_ptr<Session> session;
  std::atomic<std::uint64_t> dropped{0};
  int attempt = 0;
  std::atomic<bool> connected{false};
  std::atomic<bool> failed{false};
  std::atomic<bool> stopped{false};
  std::thread thread;

  void connect() {
    tcp::endpoint ep;
    try {
      ep = resolve(options.endpoint, io);
    } catch (const Error&) {
      return connect_failed();
    }
    auto socket = std::make_shared<tcp::socket>(io);
    socket->async_connect(ep, [this, socket](error_code ec) {
      if (stopped) return;
      if (ec) return connect_failed();
      attach(std::move(*socket));
    });
  }

  void attach(tcp::socket socket) {
    std::shared_ptr<Session> s;
    if (options.endpoint.transport == Transport::TcpFramed) {
      s = std::make_shared<TcpSession>(std::move(socket));
    } else {
      s = std::make_shared<WsSession>(std::move(socket), false, options.endpoint.host, options.endpoint.path);
    }
    s->dropped = &dropped;
    s->on_frame = [this](std::string body) {
      if (options.on_frame) options.on_frame(std::move(body));
    };
    s->on_open = [this] {
      attempt = 0;
      connected = true;
      if (options.on_connect) options.on_connect();
    };
    s->on_error = [this](const Error& e) {
      if (options.on_error) options.on_error(e);
    };
    s->on_closed = [this, raw = s.get()] {
      const bool was_connected = connected.exchange(false);
      if (session.get() == raw) session.reset();
      if (was_connected && options.on_disconnect) options.on_disconnect();
      if (!stopped) {
        if (!was_connected) ++attempt;
        schedule();
      }
    };
    session = s;
    s->start();
  }

  void connect_failed() {
    ++attempt;
    if (options.backoff.max_attempts > 0 && attempt >= options.backoff.max_attempts) {
      failed = true;
      if (options.on_error) {
        options.on_error(Error(ErrorCode::ConnectFailure, "cannot reach " + options.endpoint.to_string() +
                                                              " after " + std::to_string(attempt) + " attempts"));
      }
      return;
    }
    schedule();
  }

  void schedule() {
    timer.expires_after(options.backoff.delay(attempt));
    timer.async_wait([this](error_code ec) {
      if (!ec && !stopped) connect();
    });
  }
};

FrameClient::FrameClient(Options options) : impl_(std::make_shared<Impl>()) {
  impl_->options = std::move(options);
  asio::post(impl_->io, [impl = impl_.get()] { impl->connect(); });
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

FrameClient::~FrameClient() { stop(); }

void FrameClient::send(std::string body) {
  if (impl_->stopped) return;
  Payload payload = make_payload(impl_->options.endpoint.transport, std::move(body));
  asio::post(impl_->io, [impl = impl_.get(), payload] {
    if (impl->session && impl->connected) impl->session->deliver(payload);
  });
}

bool FrameClient::connected() const { return impl_->connected.load(); }

bool FrameClient::failed() const { return impl_->failed.load(); }

void FrameClient::stop() {
  if (impl_->stopped.exchange(true)) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    impl->timer.cancel();
    if (impl->session) impl->session->close();
    impl->session.reset();
    impl->connected = false;
    impl->guard.reset();
    impl->io.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace xrt
