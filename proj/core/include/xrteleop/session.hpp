#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace xrt {

/// One received tracking frame.
struct SessionEntry {
  std::int64_t received_ns = 0;
  std::string frame;

  bool operator==(const SessionEntry&) const = default;
};

/// File layout: "XRTSESS1", then per entry received_ns as big-endian i64
/// followed by the frame exactly as on the TCP wire (big-endian u32 length
/// + body).
std::string serialize_session(const std::vector<SessionEntry>& entries);
/// Throws MalformedDocument.
std::vector<SessionEntry> parse_session(std::string_view bytes);
void save_session(const std::vector<SessionEntry>& entries, const std::string& path);
std::vector<SessionEntry> load_session(const std::string& path);

/// Lossless tap for the streaming recorder: appends go into a bounded queue
/// drained by a writer thread. append() throws BufferOverflow when the
/// queue is full.
class SessionWriter {
 public:
  explicit SessionWriter(const std::string& path, std::size_t max_queued = 4096);
  ~SessionWriter();
  SessionWriter(const SessionWriter&) = delete;
  SessionWriter& operator=(const SessionWriter&) = delete;

  void append(std::int64_t received_ns, std::string_view frame);
  std::uint64_t written() const;
  /// Flushes and closes the file.
  void close();

 private:
  void run();

  std::ofstream out_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<SessionEntry> queue_;
  std::size_t max_queued_;
  std::uint64_t written_ = 0;
  bool closing_ = false;
  std::thread thread_;
};

}  // namespace xrt
