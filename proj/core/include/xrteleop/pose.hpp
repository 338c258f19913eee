#pragma once

#include <Eigen/Geometry>

namespace xrt {

/// Rigid transform: position in meters plus a unit quaternion.
///
/// Poses compose left to right in the usual frame-chaining sense:
/// compose(a_T_b, b_T_c) == a_T_c.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Pose() = default;
  /// The orientation is normalized on construction.
  Pose(const Eigen::Vector3d& p, const Eigen::Quaterniond& q);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& p);
  static Pose from_rotation(const Eigen::Quaterniond& q);

  Eigen::Matrix3d rotation() const { return orientation.toRotationMatrix(); }
  Eigen::Vector3d transform_point(const Eigen::Vector3d& p) const;

  bool operator==(const Pose& other) const;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Rotation vector (axis * angle, angle in [0, pi]) of a unit quaternion.
Eigen::Vector3d rotation_log(const Eigen::Quaterniond& q);
Eigen::Quaterniond rotation_exp(const Eigen::Vector3d& rotvec);

/// Fixed-axis roll/pitch/yaw as used by robot-description files:
/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Quaterniond quaternion_from_rpy(double roll, double pitch, double yaw);
Eigen::Vector3d rpy_from_quaternion(const Eigen::Quaterniond& q);

/// Angle in radians between two orientations.
double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

}  // namespace xrt
