#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xrteleop/pose.hpp"

namespace xrt {

/// Wire pose: x, y, z, qx, qy, qz, qw in the OpenXR frame
/// (right-handed, X right, Y up, Z backward).
using Pose7 = std::array<double, 7>;
using Vector6 = std::array<double, 6>;

inline constexpr int kBodyJointCount = 24;
/// Allowed deviation of a wire quaternion's norm from 1.
inline constexpr double kWireQuaternionTolerance = 1e-3;

/// Builds a Pose from seven numbers; the quaternion is renormalized.
/// Throws ArityError, NonFiniteValue or DegenerateQuaternion.
Pose parse_pose7(std::span<const double> values);
/// Same, from the comma-separated text form "x,y,z,qx,qy,qz,qw".
Pose parse_pose7(std::string_view text);
Pose7 to_pose7(const Pose& pose);
Pose to_pose(const Pose7& wire);
/// Comma-separated, shortest round-trip digits.
std::string format_pose7(const Pose7& wire);

struct HeadState {
  Pose7 pose{0, 0, 0, 0, 0, 0, 1};
  int status = 1;     ///< 0 unreliable, 1 reliable
  int hand_mode = 0;  ///< 0 none, 1 controller, 2 hand

  bool operator==(const HeadState&) const = default;
};

struct ControllerState {
  Pose7 pose{0, 0, 0, 0, 0, 0, 1};
  double axis_x = 0.0;  ///< [-1, 1]
  double axis_y = 0.0;  ///< [-1, 1]
  bool axis_click = false;
  double grip = 0.0;     ///< [0, 1]
  double trigger = 0.0;  ///< [0, 1]
  bool primary_button = false;
  bool secondary_button = false;
  bool menu_button = false;

  bool operator==(const ControllerState&) const = default;
};

struct HandJointEntry {
  Pose7 pose{0, 0, 0, 0, 0, 0, 1};
  std::uint32_t status = 0;
  double radius = 0.0;

  bool operator==(const HandJointEntry&) const = default;
};

struct HandState {
  bool is_active = false;
  double scale = 1.0;
  /// 26 entries in OpenXR order; may be empty while inactive.
  std::vector<HandJointEntry> joints;

  bool operator==(const HandState&) const = default;
};

struct BodyJointEntry {
  Pose7 pose{0, 0, 0, 0, 0, 0, 1};
  Vector6 velocity{};
  Vector6 acceleration{};

  bool operator==(const BodyJointEntry&) const = default;
};

struct BodyState {
  std::vector<BodyJointEntry> joints;  ///< exactly 24

  bool operator==(const BodyState&) const = default;
};

struct MotionTrackerState {
  Pose7 p{0, 0, 0, 0, 0, 0, 1};
  Vector6 va{};   ///< linear + angular velocity
  Vector6 wva{};  ///< linear + angular acceleration
  std::string sn;

  bool operator==(const MotionTrackerState&) const = default;
};

/// One tracking sample. Optional sections are encoded as explicit nulls so
/// every packet carries the same set of keys.
struct TrackingPacket {
  std::int64_t timestamp_ns = 0;
  std::uint64_t sequence = 0;
  HeadState head;
  std::optional<ControllerState> left_controller;
  std::optional<ControllerState> right_controller;
  std::optional<HandState> left_hand;
  std::optional<HandState> right_hand;
  std::optional<BodyState> body;
  std::vector<MotionTrackerState> trackers;

  bool operator==(const TrackingPacket&) const = default;
};

/// Throws InvariantViolation when the packet breaks a schema invariant.
void validate_packet(const TrackingPacket& packet);

/// Canonical UTF-8 JSON: sorted keys, shortest round-trip numbers.
std::string encode_packet(const TrackingPacket& packet);

/// Throws MalformedJson, SchemaViolation or RangeViolation; StaleSequence
/// when `last_sequence` is given and the packet does not advance it.
/// Unknown keys are ignored.
TrackingPacket decode_packet(std::string_view bytes, std::optional<std::uint64_t> last_sequence = std::nullopt);

// Coordinate conventions.

enum class FrameConvention {
  /// OpenXR (x right, y up, z back) -> robot (x forward, y left, z up).
  OpenXrToRobot,
  Identity,
};

FrameConvention parse_frame_convention(std::string_view name);
std::string_view to_string(FrameConvention convention) noexcept;
Eigen::Matrix3d convention_rotation(FrameConvention convention);

/// Change of basis from the XR frame into the robot frame.
Pose xr_to_robot(const Pose& pose, FrameConvention convention = FrameConvention::OpenXrToRobot);

}  // namespace xrt
