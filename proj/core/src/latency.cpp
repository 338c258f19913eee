#include "xrteleop/latency.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "xrteleop/error.hpp"

namespace xrt {

LatencyReport measure_latency(std::span<const LatencySample> window, std::int64_t clock_offset_ns) {
  if (window.empty()) throw Error(ErrorCode::EmptyWindow, "no latency samples in window");
  std::vector<double> ms;
  ms.reserve(window.size());
  std::set<std::uint64_t> sequences;
  for (const auto& s : window) {
    ms.push_back(static_cast<double>(s.received_ns - s.sent_ns - clock_offset_ns) * 1e-6);
    sequences.insert(s.sequence);
  }
  LatencyReport report;
  report.samples = ms.size();
  double sum = 0.0;
  for (double v : ms) sum += v;
  report.mean_ms = sum / static_cast<double>(ms.size());
  double sq = 0.0;
  for (double v : ms) sq += (v - report.mean_ms) * (v - report.mean_ms);
  report.std_ms = std::sqrt(sq / static_cast<double>(ms.size()));
  std::sort(ms.begin(), ms.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ms.size())));
  report.p99_ms = ms[std::max<std::size_t>(rank, 1) - 1];
  const double span = static_cast<double>(*sequences.rbegin() - *sequences.begin()) + 1.0;
  report.loss_fraction = 1.0 - static_cast<double>(sequences.size()) / span;
  return report;
}

LatencyMeter::LatencyMeter(std::size_t window, std::int64_t clock_offset_ns)
    : window_(std::max<std::size_t>(window, 1)), offset_(clock_offset_ns) {}

void LatencyMeter::add(const LatencySample& sample) {
  std::lock_guard lock(mutex_);
  samples_.push_back(sample);
  while (samples_.size() > window_) samples_.pop_front();
}

std::size_t LatencyMeter::size() const {
  std::lock_guard lock(mutex_);
  return samples_.size();
}

LatencyReport LatencyMeter::report() const {
  std::vector<LatencySample> copy;
  {
    std::lock_guard lock(mutex_);
    copy.assign(samples_.begin(), samples_.end());
  }
  return measure_latency(copy, offset_);
}

}  // namespace xrt
