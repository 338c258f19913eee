#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xrteleop/kinematics.hpp"
#include "xrteleop/pose.hpp"

namespace xrt {

enum class TaskKind { FramePose, FramePosition };

/// One weighted term of the differential IK objective.
struct Task {
  std::string frame;
  Pose target;
  double weight = 1.0;
  RowSelection rows = RowSelection::all();
  TaskKind kind = TaskKind::FramePose;

  static Task pose(std::string frame, const Pose& target, double weight = 1.0);
  /// Position-only task; used for auxiliary motion trackers (e.g. elbows).
  static Task position(std::string frame, const Eigen::Vector3d& target, double weight = 1.0);
};

/// Per-joint position and velocity bounds.
struct ConstraintSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd velocity;
  /// Seconds over which a position limit may be approached.
  double limit_horizon = 0.1;

  static ConstraintSet from_chain(const KinematicChain& chain, double limit_horizon = 0.1);
};

struct IkParams {
  /// Tikhonov weight on |qdot|^2. Internally floored at 1e-9.
  double damping = 1e-6;
  double manipulability_weight = 0.0;
  /// Control period in seconds.
  double dt = 1.0 / 90.0;
  /// Residual clamp: position error is capped at max_task_speed*dt meters,
  /// orientation error at max_task_speed*dt radians.
  double max_task_speed = std::numeric_limits<double>::infinity();
  /// Frame whose Jacobian feeds the manipulability term. Empty selects the
  /// first task's frame.
  std::string manipulability_frame;
  RowSelection manipulability_rows = RowSelection::position();
  double manipulability_fd_step = 1e-6;
};

enum class IkStatus { Optimal, Clipped, InfeasibleRelaxed };

struct IkSolution {
  Eigen::VectorXd qdot;
  /// sum_i w_i |J_i qdot + e_i|^2 + damping |qdot|^2 - k grad(m).qdot
  double objective = 0.0;
  /// Joint indices whose velocity bound is active.
  std::vector<int> active_constraints;
  /// Joint indices whose bounds were infeasible and got pinned to zero.
  std::vector<int> relaxed;
  IkStatus status = IkStatus::Optimal;
  double kkt_residual = 0.0;
};

/// Displacement taking `current` to `target`: position rows are
/// target - current, orientation rows the world-frame rotation vector of
/// target * current^-1. When `max_norm` is set, the position and
/// orientation blocks are each clamped to that magnitude.
Eigen::VectorXd pose_error(const Pose& current, const Pose& target, const RowSelection& rows,
                           std::optional<double> max_norm = std::nullopt);

/// Velocity bounds after shrinking position limits over the horizon:
/// [max(-v, (lower - q)/h), min(v, (upper - q)/h)].
struct VelocityBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> infeasible;
};
VelocityBounds velocity_bounds(const Configuration& q, const ConstraintSet& constraints);

/// Solves one differential IK step as a box-constrained QP:
///
///   min  sum_i w_i |J_i qdot + e_i|^2 + damping |qdot|^2 - k grad(m).qdot
///
/// with e_i = -pose_error(current_i, target_i) / dt, so the minimizer moves
/// each frame toward its target within one control period.
IkSolution solve_dik(const KinematicChain& chain, const Configuration& q, const std::vector<Task>& tasks,
                     const ConstraintSet& constraints, const IkParams& params);

struct Integration {
  Configuration q;
  /// Joint indices that were clamped into their limits.
  std::vector<int> clamped;
};

Integration integrate(const Configuration& q, const Eigen::VectorXd& qdot, double dt,
                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

// Grip clutching for relative end-effector control.

struct ClutchState {
  bool engaged = false;
  std::optional<Pose> anchor_device;
  std::optional<Pose> anchor_ee;
};

ClutchState clutch_engage(const Pose& device, const Pose& ee);
/// Engaging an already engaged clutch keeps the original anchors.
ClutchState clutch_engage(const ClutchState& state, const Pose& device, const Pose& ee);
ClutchState clutch_release(const ClutchState& state);

/// End-effector target while engaged, std::nullopt otherwise. The device
/// displacement since engage is rotated by `alignment` and applied to the
/// anchored end-effector pose.
std::optional<Pose> clutched_target(const ClutchState& state, const Pose& device_now,
                                    const Eigen::Quaterniond& alignment = Eigen::Quaterniond::Identity());

}  // namespace xrt
