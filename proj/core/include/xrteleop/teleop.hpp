#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xrteleop/error.hpp"
#include "xrteleop/ik.hpp"
#include "xrteleop/kinematics.hpp"
#include "xrteleop/protocol.hpp"
#include "xrteleop/retargeting.hpp"

namespace xrt {

enum class Side { Left, Right };

Side parse_side(std::string_view name);
std::string_view to_string(Side side) noexcept;

struct ArmMapping {
  Side side = Side::Right;
  std::string chain;
  std::string ee_frame;
  double weight = 1.0;
  /// Extra rotation applied to device displacements (robot frame).
  Eigen::Quaterniond alignment = Eigen::Quaterniond::Identity();
};

/// A serial-numbered tracker pulling `frame` toward its robot-frame
/// position plus `offset`, while the chain's arm is engaged.
struct TrackerMapping {
  std::string sn;
  std::string chain;
  std::string frame;
  double weight = 0.1;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

struct HandMapping {
  Side side = Side::Right;
  std::string chain;
  RetargetMap map;
  RetargetParams params;
};

struct BaseLimits {
  double v_max = 0.5;  ///< m/s
  double w_max = 1.0;  ///< rad/s
  double deadzone = 0.05;
};

struct GimbalLimits {
  double yaw_min = -1.5707963267948966;
  double yaw_max = 1.5707963267948966;
  double pitch_min = -0.7853981633974483;
  double pitch_max = 0.7853981633974483;
};

/// Piecewise-linear map from trigger [0, 1] to gripper command [0, 1].
struct GripperCurve {
  /// (trigger, value) knots sorted by trigger.
  std::vector<std::pair<double, double>> knots{{0.0, 0.0}, {1.0, 1.0}};

  double operator()(double trigger) const;
};

struct GripperMapping {
  Side side = Side::Right;
  GripperCurve curve;
};

struct TeleopConfig {
  FrameConvention convention = FrameConvention::OpenXrToRobot;
  std::map<std::string, KinematicChain> chains;
  /// Start configuration per chain; chains without one start at neutral.
  std::map<std::string, Configuration> home;
  std::vector<ArmMapping> arms;
  std::vector<TrackerMapping> trackers;
  std::vector<HandMapping> hands;
  BaseLimits base;
  GimbalLimits gimbal;
  std::vector<GripperMapping> grippers;
  IkParams ik;
  double limit_horizon = 0.1;
  double grip_engage = 0.9;
  double grip_release = 0.7;

  /// Throws UnknownFrame or InvalidArgument.
  void validate() const;
  Configuration home_configuration(const std::string& chain) const;
};

/// Reads the JSON config; chain and retarget-map paths are resolved
/// relative to the config file. Throws MalformedDocument, UnknownFrame,
/// InvalidArgument and anything the chain loader throws.
TeleopConfig load_teleop_config(const std::string& path);
TeleopConfig parse_teleop_config(std::string_view text, const std::string& base_dir = ".");

struct ArmVelocity {
  std::string chain;
  Eigen::VectorXd qdot;
  /// Clutched end-effector target the velocity was solved for.
  Pose target;
  IkStatus status = IkStatus::Optimal;
};

struct HandConfig {
  std::string chain;
  Configuration q;
};

struct BaseVelocity {
  double vx = 0.0;
  double vy = 0.0;
  double wz = 0.0;
};

struct GimbalAngles {
  double yaw = 0.0;
  double pitch = 0.0;
};

struct GripperCommand {
  Side side = Side::Right;
  double value = 0.0;
};

using RobotCommand = std::variant<ArmVelocity, HandConfig, BaseVelocity, GimbalAngles, GripperCommand>;

struct CommandFailure {
  /// Chain name, or "gimbal", "base", ...
  std::string source;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
};

struct ArmState {
  ClutchState clutch;
  bool grip_pressed = false;
};

struct TeleopState {
  /// Measured configuration per chain; the caller refreshes these.
  std::map<std::string, Configuration> q;
  /// Keyed by chain name.
  std::map<std::string, ArmState> arms;
  std::optional<GimbalAngles> last_gimbal;
  /// Last retargeting output per hand chain.
  std::map<std::string, Configuration> hand_q;

  static TeleopState initial(const TeleopConfig& config);
};

struct StepResult {
  std::vector<RobotCommand> commands;
  std::vector<CommandFailure> failures;
  TeleopState state;
};

/// Throws RangeViolation for axes outside [-1, 1].
BaseVelocity map_joystick_to_base(double axis_lx, double axis_ly, double axis_rx, const BaseLimits& limits);

/// Yaw and pitch (intrinsic Z then Y, roll dropped) of the head in the
/// robot frame, clamped to the limits. Throws UnreliableTracking when
/// `status` is 0.
GimbalAngles map_head_to_gimbal(const Pose& head_xr, const GimbalLimits& limits, int status = 1,
                                FrameConvention convention = FrameConvention::OpenXrToRobot);

HandFrame hand_frame_from_state(const HandState& hand);

/// One control tick. Pure: the result depends only on the arguments.
StepResult step(const TrackingPacket& packet, const TeleopState& state, const TeleopConfig& config);

}  // namespace xrt
