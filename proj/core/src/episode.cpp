#include "xrteleop/episode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xrteleop/error.hpp"

namespace xrt {
namespace {

constexpr std::string_view kMagic = "XRTEPI01";

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= 8);
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::MalformedDocument, "episode file truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get_le() {
    const auto raw = take(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t(static_cast<unsigned char>(raw[i])) << (8 * i);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::int64_t sample_time(std::int64_t t0, std::size_t k, double rate_hz) {
  return t0 + std::llround(static_cast<double>(k) * 1e9 / rate_hz);
}

void check_stream(std::span<const TimedVector> stream, const char* name) {
  if (stream.empty()) throw Error(ErrorCode::EmptyStream, std::string(name) + " stream is empty");
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].value.size() != stream[0].value.size()) {
      throw Error(ErrorCode::DimensionDrift, std::string(name) + " length changes at sample " + std::to_string(i));
    }
    if (stream[i].t_ns < stream[i - 1].t_ns) {
      throw Error(ErrorCode::InvalidArgument, std::string(name) + " stream not sorted by time");
    }
  }
}

}  // namespace

void EpisodeRecord::validate() const {
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "episode rate must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.state.size() != state_dim || f.command.size() != command_dim) {
      throw Error(ErrorCode::DimensionDrift, "episode frame " + std::to_string(i) + " has the wrong length");
    }
    if (i > 0 && f.t_ns <= frames[i - 1].t_ns) {
      throw Error(ErrorCode::InvalidArgument, "episode timestamps must strictly increase");
    }
  }
}

EpisodeRecord record_episode(std::span<const TimedVector> states, std::span<const TimedVector> commands,
                             double rate_hz, std::string task) {
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "episode rate must be positive");
  check_stream(states, "state");
  check_stream(commands, "command");
  EpisodeRecord record;
  record.task = std::move(task);
  record.rate_hz = rate_hz;
  record.state_dim = states[0].value.size();
  record.command_dim = commands[0].value.size();
  const std::int64_t t0 = std::max(states.front().t_ns, commands.front().t_ns);
  const std::int64_t t_end = std::max(states.back().t_ns, commands.back().t_ns);
  record.start_time_ns = t0;
  std::size_t si = 0;
  std::size_t ci = 0;
  for (std::size_t k = 0;; ++k) {
    const std::int64_t t = sample_time(t0, k, rate_hz);
    if (t > t_end) break;
    while (si + 1 < states.size() && states[si + 1].t_ns <= t) ++si;
    while (ci + 1 < commands.size() && commands[ci + 1].t_ns <= t) ++ci;
    record.frames.push_back({t, states[si].packet_ref, states[si].value, commands[ci].value});
  }
  return record;
}

std::string serialize_episode(const EpisodeRecord& record) {
  record.validate();
  const nlohmann::json header = {
      {"task", record.task},
      {"start_time_ns", record.start_time_ns},
      {"rate_hz", record.rate_hz},
      {"state_dim", record.state_dim},
      {"command_dim", record.command_dim},
      {"frame_count", record.frames.size()},
  };
  const std::string header_text = header.dump();
  std::string out(kMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& f : record.frames) {
    put_le<std::int64_t>(out, f.t_ns);
    put_le<std::uint64_t>(out, f.packet_ref);
    for (double v : f.state) put_le<double>(out, v);
    for (double v : f.command) put_le<double>(out, v);
  }
  return out;
}

EpisodeRecord parse_episode(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw Error(ErrorCode::MalformedDocument, "not an episode file");
  const auto header_len = in.get_le<std::uint32_t>();
  nlohmann::json header;
  EpisodeRecord record;
  std::size_t count = 0;
  try {
    header = nlohmann::json::parse(in.take(header_len));
    record.task = header.at("task").get<std::string>();
    record.start_time_ns = header.at("start_time_ns").get<std::int64_t>();
    record.rate_hz = header.at("rate_hz").get<double>();
    record.state_dim = header.at("state_dim").get<std::size_t>();
    record.command_dim = header.at("command_dim").get<std::size_t>();
    count = header.at("frame_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("episode header: ") + e.what());
  }
  const std::size_t frame_bytes = 16 + 8 * (record.state_dim + record.command_dim);
  if (count > bytes.size() / frame_bytes) throw Error(ErrorCode::MalformedDocument, "episode file truncated");
  record.frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    EpisodeFrame f;
    f.t_ns = in.get_le<std::int64_t>();
    f.packet_ref = in.get_le<std::uint64_t>();
    f.state.resize(record.state_dim);
    f.command.resize(record.command_dim);
    for (double& v : f.state) v = in.get_le<double>();
    for (double& v : f.command) v = in.get_le<double>();
    record.frames.push_back(std::move(f));
  }
  if (!in.done()) throw Error(ErrorCode::MalformedDocument, "trailing bytes after episode frames");
  try {
    record.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
  return record;
}

void save_episode(const EpisodeRecord& record, const std::string& path) {
  const std::string bytes = serialize_episode(record);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EpisodeRecord load_episode(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_episode(bytes);
}

ReplayStats replay_episode(const EpisodeRecord& record, const std::function<void(const EpisodeFrame&)>& sink,
                           double speed) {
  using clock = std::chrono::steady_clock;
  if (!(speed > 0.0)) throw Error(ErrorCode::InvalidArgument, "replay speed must be positive");
  ReplayStats stats;
  if (record.frames.empty()) return stats;
  const auto start = clock::now();
  const std::int64_t t0 = record.frames.front().t_ns;
  constexpr auto kSpin = std::chrono::microseconds(200);
  for (const auto& frame : record.frames) {
    const auto offset = std::chrono::nanoseconds(std::llround(static_cast<double>(frame.t_ns - t0) / speed));
    const auto due = start + std::chrono::duration_cast<clock::duration>(offset);
    std::this_thread::sleep_until(due - kSpin);
    while (clock::now() < due) {
    }
    const auto late = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - due).count();
    stats.max_lateness_ns = std::max(stats.max_lateness_ns, late);
    if (late > kReplayToleranceNs) ++stats.late_frames;
    sink(frame);
    ++stats.frames;
  }
  return stats;
}

EpisodeRecorder::EpisodeRecorder(std::string task, double rate_hz, std::size_t capacity) : capacity_(capacity) {
  if (!(rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "episode rate must be positive");
  record_.task = std::move(task);
  record_.rate_hz = rate_hz;
}

EpisodeRecorder::~EpisodeRecorder() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void EpisodeRecorder::update_state(std::vector<double> state, std::uint64_t packet_ref) {
  std::lock_guard lock(mutex_);
  if (state_ && state_->size() != state.size()) {
    throw Error(ErrorCode::DimensionDrift, "state length changed from " + std::to_string(state_->size()) + " to " +
                                               std::to_string(state.size()));
  }
  state_ = std::move(state);
  packet_ref_ = packet_ref;
}

void EpisodeRecorder::update_command(std::vector<double> command) {
  std::lock_guard lock(mutex_);
  if (command_ && command_->size() != command.size()) {
    throw Error(ErrorCode::DimensionDrift, "command length changed from " + std::to_string(command_->size()) +
                                               " to " + std::to_string(command.size()));
  }
  command_ = std::move(command);
}

void EpisodeRecorder::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { run(); });
}

std::size_t EpisodeRecorder::frame_count() const {
  std::lock_guard lock(mutex_);
  return record_.frames.size();
}

void EpisodeRecorder::run() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::int64_t wall0 = 0;
  for (std::size_t k = 0;; ++k) {
    const auto offset = std::chrono::nanoseconds(std::llround(static_cast<double>(k) * 1e9 / record_.rate_hz));
    std::unique_lock lock(mutex_);
    if (cv_.wait_until(lock, start + std::chrono::duration_cast<clock::duration>(offset), [this] { return stopping_; })) {
      return;
    }
    if (!state_ || !command_) continue;
    if (record_.frames.size() >= capacity_) {
      overflow_ = true;
      return;
    }
    if (record_.frames.empty()) {
      wall0 = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
                  .count() -
              offset.count();
      record_.start_time_ns = wall0 + offset.count();
      record_.state_dim = state_->size();
      record_.command_dim = command_->size();
    }
    record_.frames.push_back({wall0 + offset.count(), packet_ref_, *state_, *command_});
  }
}

EpisodeRecord EpisodeRecorder::finish() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::lock_guard lock(mutex_);
  if (overflow_) {
    throw Error(ErrorCode::BufferOverflow, "episode recorder exceeded " + std::to_string(capacity_) + " frames");
  }
  if (record_.frames.empty()) throw Error(ErrorCode::EmptyStream, "no frames recorded");
  return record_;
}

}  // namespace xrt
