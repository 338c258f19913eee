#include "xrteleop/pose.hpp"

#include <algorithm>
#include <cmath>

namespace xrt {

Pose::Pose(const Eigen::Vector3d& p, const Eigen::Quaterniond& q)
    : position(p), orientation(q.normalized()) {}

Pose Pose::from_translation(const Eigen::Vector3d& p) {
  return Pose(p, Eigen::Quaterniond::Identity());
}

Pose Pose::from_rotation(const Eigen::Quaterniond& q) {
  return Pose(Eigen::Vector3d::Zero(), q);
}

Eigen::Vector3d Pose::transform_point(const Eigen::Vector3d& p) const {
  return position + orientation * p;
}

bool Pose::operator==(const Pose& other) const {
  return position == other.position && orientation.coeffs() == other.orientation.coeffs();
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.position = a.position + a.orientation * b.position;
  out.orientation = (a.orientation * b.orientation).normalized();
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.orientation = p.orientation.conjugate();
  out.position = -(out.orientation * p.position);
  return out;
}

Eigen::Vector3d rotation_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  // Shortest arc: keep w >= 0 so the angle lands in [0, pi].
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) {
    // First-order expansion around identity.
    return 2.0 * v;
  }
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

Eigen::Quaterniond rotation_exp(const Eigen::Vector3d& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    return q.normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotvec / angle));
}

Eigen::Quaterniond quaternion_from_rpy(double roll, double pitch, double yaw) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX());
  return q.normalized();
}

Eigen::Vector3d rpy_from_quaternion(const Eigen::Quaterniond& q) {
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll = 0.0;
  double yaw = 0.0;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: fold everything into yaw.
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return {roll, pitch, yaw};
}

double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return rotation_log(a * b.conjugate()).norm();
}

}  // namespace xrt
