#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <span>

namespace xrt {

struct LatencySample {
  std::uint64_t sequence = 0;
  std::int64_t sent_ns = 0;
  std::int64_t received_ns = 0;
};

struct LatencyReport {
  std::size_t samples = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;  ///< population standard deviation
  double p99_ms = 0.0;  ///< nearest rank
  /// 1 - distinct sequences / (max - min + 1).
  double loss_fraction = 0.0;
};

/// latency = received - sent - clock_offset, where the offset is receiver
/// clock minus sender clock (zero on loopback). Throws EmptyWindow.
LatencyReport measure_latency(std::span<const LatencySample> window, std::int64_t clock_offset_ns = 0);

/// Thread-safe sliding window over the most recent samples.
class LatencyMeter {
 public:
  explicit LatencyMeter(std::size_t window = 1000, std::int64_t clock_offset_ns = 0);

  void add(const LatencySample& sample);
  std::size_t size() const;
  /// Throws EmptyWindow.
  LatencyReport report() const;

 private:
  mutable std::mutex mutex_;
  std::deque<LatencySample> samples_;
  std::size_t window_;
  std::int64_t offset_;
};

}  // namespace xrt
