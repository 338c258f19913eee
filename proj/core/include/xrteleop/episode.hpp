#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace xrt {

struct TimedVector {
  std::int64_t t_ns = 0;
  std::vector<double> value;
  std::uint64_t packet_ref = 0;
};

struct EpisodeFrame {
  std::int64_t t_ns = 0;
  std::uint64_t packet_ref = 0;
  std::vector<double> state;
  std::vector<double> command;

  bool operator==(const EpisodeFrame&) const = default;
};

struct EpisodeRecord {
  std::string task;
  std::int64_t start_time_ns = 0;
  double rate_hz = 50.0;
  std::size_t state_dim = 0;
  std::size_t command_dim = 0;
  std::vector<EpisodeFrame> frames;

  /// Throws InvalidArgument (timestamps not strictly increasing) or
  /// DimensionDrift.
  void validate() const;
  bool operator==(const EpisodeRecord&) const = default;
};

/// Samples both streams on a fixed clock starting at the later of the two
/// first timestamps, taking the nearest older sample from each source.
/// Streams must be sorted by time. Throws EmptyStream or DimensionDrift.
EpisodeRecord record_episode(std::span<const TimedVector> states, std::span<const TimedVector> commands,
                             double rate_hz = 50.0, std::string task = {});

/// Binary layout, all integers little-endian:
///   "XRTEPI01"                      8 bytes
///   header_len                      u32
///   header                          JSON, sorted keys: command_dim,
///                                   frame_count, rate_hz, start_time_ns,
///                                   state_dim, task
///   frame_count x {
///     t_ns                          i64
///     packet_ref                    u64
///     state                         f64 x state_dim
///     command                       f64 x command_dim
///   }
std::string serialize_episode(const EpisodeRecord& record);
/// Throws MalformedDocument.
EpisodeRecord parse_episode(std::string_view bytes);
void save_episode(const EpisodeRecord& record, const std::string& path);
EpisodeRecord load_episode(const std::string& path);

struct ReplayStats {
  std::size_t frames = 0;
  /// Worst emission time minus scheduled time.
  std::int64_t max_lateness_ns = 0;
  /// Frames emitted more than kReplayTolerance after their schedule.
  std::size_t late_frames = 0;
};

inline constexpr std::int64_t kReplayToleranceNs = 1'000'000;

/// Re-emits frames with their recorded spacing (divided by `speed`).
ReplayStats replay_episode(const EpisodeRecord& record, const std::function<void(const EpisodeFrame&)>& sink,
                           double speed = 1.0);

/// Online recorder: a sampling thread snapshots the latest state and
/// command at the recorder rate. Buffering is bounded; exceeding
/// `capacity` frames stops recording and finish() throws BufferOverflow.
class EpisodeRecorder {
 public:
  EpisodeRecorder(std::string task, double rate_hz = 50.0, std::size_t capacity = 1u << 20);
  ~EpisodeRecorder();
  EpisodeRecorder(const EpisodeRecorder&) = delete;
  EpisodeRecorder& operator=(const EpisodeRecorder&) = delete;

  /// Throws DimensionDrift if the length changes.
  void update_state(std::vector<double> state, std::uint64_t packet_ref = 0);
  void update_command(std::vector<double> command);

  void start();
  std::size_t frame_count() const;
  /// Stops sampling. Throws EmptyStream or BufferOverflow.
  EpisodeRecord finish();

 private:
  void run();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  EpisodeRecord record_;
  std::size_t capacity_;
  std::optional<std::vector<double>> state_;
  std::optional<std::vector<double>> command_;
  std::uint64_t packet_ref_ = 0;
  bool stopping_ = false;
  bool overflow_ = false;
  std::thread thread_;
};

}  // namespace xrt
