#include "xrteleop/session.hpp"

#include <iterator>

#include "xrteleop/error.hpp"
#include "xrteleop/framing.hpp"

namespace xrt {
namespace {

constexpr std::string_view kMagic = "XRTSESS1";

void put_be64(std::string& out, std::int64_t value) {
  const auto bits = static_cast<std::uint64_t>(value);
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void append_entry(std::string& out, std::int64_t received_ns, std::string_view frame) {
  put_be64(out, received_ns);
  out += encode_frame(frame);
}

}  // namespace

std::string serialize_session(const std::vector<SessionEntry>& entries) {
  std::string out(kMagic);
  for (const auto& e : entries) append_entry(out, e.received_ns, e.frame);
  return out;
}

std::vector<SessionEntry> parse_session(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw Error(ErrorCode::MalformedDocument, "not a session file");
  std::vector<SessionEntry> entries;
  std::size_t pos = kMagic.size();
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 12) throw Error(ErrorCode::MalformedDocument, "session file truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits = (bits << 8) | p[i];
    const std::uint32_t len = read_be32(p + 8);
    pos += 12;
    if (len > kMaxFrameBytes || bytes.size() - pos < len) {
      throw Error(ErrorCode::MalformedDocument, "session frame length out of range");
    }
    entries.push_back({static_cast<std::int64_t>(bits), std::string(bytes.substr(pos, len))});
    pos += len;
  }
  return entries;
}

void save_session(const std::vector<SessionEntry>& entries, const std::string& path) {
  const std::string bytes = serialize_session(entries);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<SessionEntry> load_session(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_session(bytes);
}

SessionWriter::SessionWriter(const std::string& path, std::size_t max_queued)
    : out_(path, std::ios::binary), max_queued_(max_queued) {
  if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out_.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  thread_ = std::thread([this] { run(); });
}

SessionWriter::~SessionWriter() { close(); }

void SessionWriter::append(std::int64_t received_ns, std::string_view frame) {
  if (frame.size() > kMaxFrameBytes) throw Error(ErrorCode::BufferOverflow, "session frame exceeds 1 MiB");
  {
    std::lock_guard lock(mutex_);
    if (closing_) throw Error(ErrorCode::InvalidArgument, "session writer is closed");
    if (queue_.size() >= max_queued_) {
      throw Error(ErrorCode::BufferOverflow, "session writer queue full (" + std::to_string(max_queued_) + ")");
    }
    queue_.push_back({received_ns, std::string(frame)});
  }
  cv_.notify_one();
}

std::uint64_t SessionWriter::written() const {
  std::lock_guard lock(mutex_);
  return written_;
}

void SessionWriter::close() {
  {
    std::lock_guard lock(mutex_);
    if (closing_ && !thread_.joinable()) return;
    closing_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  out_.flush();
  out_.close();
}

void SessionWriter::run() {
  std::string buffer;
  for (;;) {
    std::deque<SessionEntry> batch;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return closing_ || !queue_.empty(); });
      if (queue_.empty() && closing_) return;
      batch.swap(queue_);
    }
    buffer.clear();
    for (const auto& e : batch) append_entry(buffer, e.received_ns, e.frame);
    out_.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    std::lock_guard lock(mutex_);
    written_ += batch.size();
  }
}

}  // namespace xrt
