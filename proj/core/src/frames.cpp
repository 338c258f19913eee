#include <charconv>
#include <cmath>

#include "xrteleop/error.hpp"
#include "xrteleop/protocol.hpp"

namespace xrt {

Pose parse_pose7(std::span<const double> values) {
  if (values.size() != 7) {
    throw Error(ErrorCode::ArityError, "pose needs 7 numbers, got " + std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "pose contains a non-finite value");
  }
  const Eigen::Quaterniond q(values[6], values[3], values[4], values[5]);
  if (q.norm() < 1e-6) throw Error(ErrorCode::DegenerateQuaternion, "pose quaternion has near-zero norm");
  // Already-unit quaternions are kept bit-exact.
  if (std::abs(q.squaredNorm() - 1.0) <= 1e-12) {
    Pose p;
    p.position = Eigen::Vector3d(values[0], values[1], values[2]);
    p.orientation = q;
    return p;
  }
  return Pose(Eigen::Vector3d(values[0], values[1], values[2]), q);
}

Pose parse_pose7(std::string_view text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
      throw Error(ErrorCode::ArityError, "pose text has a non-numeric field: '" + std::string(token) + "'");
    }
    values.push_back(v);
    if (values.size() > 7) break;
    start = end + 1;
  }
  return parse_pose7(std::span<const double>(values));
}

Pose7 to_pose7(const Pose& pose) {
  return {pose.position.x(),    pose.position.y(),    pose.position.z(),   pose.orientation.x(),
          pose.orientation.y(), pose.orientation.z(), pose.orientation.w()};
}

Pose to_pose(const Pose7& wire) { return parse_pose7(std::span<const double>(wire)); }

std::string format_pose7(const Pose7& wire) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < wire.size(); ++i) {
    if (i) out.push_back(',');
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), wire[i]);
    out.append(buf, ptr);
  }
  return out;
}

FrameConvention parse_frame_convention(std::string_view name) {
  if (name == "openxr_to_robot") return FrameConvention::OpenXrToRobot;
  if (name == "identity") return FrameConvention::Identity;
  throw Error(ErrorCode::UnknownConvention, "unknown frame convention '" + std::string(name) + "'");
}

std::string_view to_string(FrameConvention convention) noexcept {
  switch (convention) {
    case FrameConvention::OpenXrToRobot: return "openxr_to_robot";
    case FrameConvention::Identity: return "identity";
  }
  return "identity";
}

Eigen::Matrix3d convention_rotation(FrameConvention convention) {
  switch (convention) {
    case FrameConvention::OpenXrToRobot: {
      // x_r = -z_xr, y_r = -x_xr, z_r = y_xr
      Eigen::Matrix3d r;
      r << 0, 0, -1,
          -1, 0, 0,
           0, 1, 0;
      return r;
    }
    case FrameConvention::Identity: return Eigen::Matrix3d::Identity();
  }
  throw Error(ErrorCode::UnknownConvention, "unknown frame convention");
}

Pose xr_to_robot(const Pose& pose, FrameConvention convention) {
  const Eigen::Matrix3d r = convention_rotation(convention);
  const Eigen::Quaterniond qr(r);
  return Pose(r * pose.position, qr * pose.orientation * qr.conjugate());
}

}  // namespace xrt
