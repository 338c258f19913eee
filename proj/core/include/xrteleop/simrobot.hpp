#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xrteleop/episode.hpp"
#include "xrteleop/session.hpp"
#include "xrteleop/teleop.hpp"
#include "xrteleop/transport.hpp"

namespace xrt {

struct SimState {
  std::map<std::string, Configuration> chains;
  double base_x = 0.0;
  double base_y = 0.0;
  /// Wrapped to (-pi, pi].
  double base_heading = 0.0;
  GimbalAngles gimbal;
  double gripper_left = 0.0;
  double gripper_right = 0.0;
  std::int64_t time_ns = 0;

  static SimState initial(const TeleopConfig& config);
};

/// Integrates one tick of commands. Throws DimensionMismatch, or
/// InvalidArgument for dt <= 0 or an unknown chain.
SimState sim_step(const SimState& state, std::span<const RobotCommand> commands, double dt,
                  const std::map<std::string, KinematicChain>& chains);

double wrap_angle(double angle);

/// {"base":{"heading","x","y"},"chains":{name:[q...]},"gimbal":{"pitch","yaw"},
///  "grippers":{"left","right"},"t":seconds}
std::string state_to_json(const SimState& state);

/// Latency/drop model applied to incoming tracking packets. Text form:
/// "constant:<ms>" or "uniform:<a>:<b>", optionally followed by
/// ",drop=<p>" and ",seed=<n>".
struct NetworkEmulation {
  enum class Delay { Constant, Uniform };
  Delay delay = Delay::Constant;
  double a_ms = 0.0;
  double b_ms = 0.0;
  double drop_probability = 0.0;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument.
  static NetworkEmulation parse(std::string_view spec);
  std::string to_string() const;
  void validate() const;
};

/// Seeded sampler over a NetworkEmulation. Identical seeds give identical
/// decision sequences on every platform.
class NetworkChannel {
 public:
  explicit NetworkChannel(const NetworkEmulation& emulation);

  /// Delay for the next packet, or nullopt when it is dropped.
  std::optional<std::int64_t> next_delay_ns();

 private:
  double uniform01();

  NetworkEmulation emulation_;
  std::mt19937_64 rng_;
};

/// Episode vectors: state is every chain's q (in name order) followed by
/// base x, y, heading; command is each arm's qdot (in arm order, zeros when
/// idle) followed by base vx, vy, wz.
std::vector<double> episode_state(const SimState& state);
std::vector<double> episode_command(const TeleopConfig& config, std::span<const RobotCommand> commands);

struct TickInfo {
  std::int64_t time_ns = 0;
  /// Packet the tick acted on (the freshest accepted so far).
  const TrackingPacket* packet = nullptr;
  bool fresh = false;
  const StepResult* step = nullptr;
  const SimState* state = nullptr;
};

struct OfflineOptions {
  double control_rate_hz = 90.0;
  std::optional<NetworkEmulation> network;
  /// Simulated time kept running after the last packet arrives.
  double tail_s = 0.5;
  std::optional<SimState> initial_state;
  std::function<void(const TickInfo&)> on_tick;
};

struct OfflineResult {
  /// One state_to_json line per control tick, newline terminated.
  std::string trace;
  SimState final_state;
  std::uint64_t ticks = 0;
  std::uint64_t consumed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t undecodable = 0;
  std::uint64_t failures = 0;
  std::vector<TimedVector> states;
  std::vector<TimedVector> commands;
};

/// Runs the control loop in virtual time against a recorded session.
/// Packets arrive at (received - first received) plus the emulated delay;
/// each tick consumes the freshest arrived packet whose sequence is newer
/// than anything consumed before, so reordered packets are never acted on.
/// Without a fresh packet the tick re-runs on the last one.
OfflineResult run_offline(const TeleopConfig& config, const std::vector<SessionEntry>& session,
                          const OfflineOptions& options = {});

struct ServiceOptions {
  /// Tracking packets arrive from clients of this server; the state stream
  /// is broadcast to the same clients.
  std::optional<Endpoint> listen;
  /// Additionally pull tracking packets from a publisher.
  std::optional<Endpoint> subscribe;
  /// Separate state-only server.
  std::optional<Endpoint> state_bind;
  double control_rate_hz = 90.0;
  std::optional<NetworkEmulation> network;
  std::optional<std::string> session_path;
  std::optional<std::string> episode_path;
  std::optional<std::string> trace_path;
  std::string task = "teleop";
};

/// Live loop: network threads feed a latest-only slot, the control thread
/// runs step + sim_step at the control rate and publishes the state.
class SimService {
 public:
  /// Throws on config or bind errors.
  SimService(TeleopConfig config, ServiceOptions options);
  ~SimService();
  SimService(const SimService&) = delete;
  SimService& operator=(const SimService&) = delete;

  std::optional<std::uint16_t> listen_port() const;
  std::optional<std::uint16_t> state_port() const;
  SimState state() const;
  std::uint64_t ticks() const;
  std::uint64_t packets_consumed() const;
  /// Stops the loop and flushes recordings.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xrt
