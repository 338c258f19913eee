#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>

namespace xrt {

/// Frames larger than this are rejected on both ends.
inline constexpr std::size_t kMaxFrameBytes = 1u << 20;

/// 4-byte big-endian length followed by the body.
std::string encode_frame(std::string_view body);

std::uint32_t read_be32(const unsigned char* p);
void write_be32(std::uint32_t v, unsigned char* p);

/// Incremental decoder for length-prefixed frames arriving in arbitrary
/// chunks. Throws BufferOverflow on a length prefix above kMaxFrameBytes.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

}  // namespace xrt
