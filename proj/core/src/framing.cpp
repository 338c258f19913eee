#include "xrteleop/framing.hpp"

#include "xrteleop/error.hpp"

namespace xrt {

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void write_be32(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v >> 24);
  p[1] = static_cast<unsigned char>(v >> 16);
  p[2] = static_cast<unsigned char>(v >> 8);
  p[3] = static_cast<unsigned char>(v);
}

std::string encode_frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw Error(ErrorCode::BufferOverflow, "frame body exceeds 1 MiB");
  std::string out(4 + body.size(), '\0');
  write_be32(static_cast<std::uint32_t>(body.size()), reinterpret_cast<unsigned char*>(out.data()));
  out.replace(4, body.size(), body);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next() {
  const std::size_t available = buffer_.size() - offset_;
  if (available < 4) return std::nullopt;
  const std::uint32_t len = read_be32(reinterpret_cast<const unsigned char*>(buffer_.data() + offset_));
  if (len > kMaxFrameBytes) throw Error(ErrorCode::BufferOverflow, "frame length prefix exceeds 1 MiB");
  if (available < 4 + std::size_t{len}) return std::nullopt;
  std::string body = buffer_.substr(offset_ + 4, len);
  offset_ += 4 + len;
  return body;
}

}  // namespace xrt
