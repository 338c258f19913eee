#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "xrteleop/kinematics.hpp"
#include "xrteleop/pose.hpp"

namespace xrt {

inline constexpr int kHandJointCount = 26;

/// OpenXR hand joint layout: palm, wrist, four thumb joints, then five
/// joints for each remaining finger.
enum class HandJoint : int {
  Palm = 0,
  Wrist,
  ThumbMetacarpal,
  ThumbProximal,
  ThumbDistal,
  ThumbTip,
  IndexMetacarpal,
  IndexProximal,
  IndexIntermediate,
  IndexDistal,
  IndexTip,
  MiddleMetacarpal,
  MiddleProximal,
  MiddleIntermediate,
  MiddleDistal,
  MiddleTip,
  RingMetacarpal,
  RingProximal,
  RingIntermediate,
  RingDistal,
  RingTip,
  LittleMetacarpal,
  LittleProximal,
  LittleIntermediate,
  LittleDistal,
  LittleTip,
};

std::string_view hand_joint_name(int index);
std::optional<int> hand_joint_index(std::string_view name);

struct HandJointSample {
  Pose pose;
  std::uint32_t status = 0;
  double radius = 0.0;
};

struct HandFrame {
  bool is_active = false;
  double scale = 1.0;
  std::array<HandJointSample, kHandJointCount> joints{};
};

struct KeypointPair {
  int human_keypoint = static_cast<int>(HandJoint::IndexTip);
  std::string robot_frame;
  int reference_keypoint = static_cast<int>(HandJoint::Wrist);
  /// Empty means the hand chain's root link.
  std::string robot_reference_frame;
};

/// Which human keypoint vectors are matched against which robot frames.
struct RetargetMap {
  std::vector<KeypointPair> pairs;
  /// Rotation from the OpenXR wrist frame to the robot hand root frame.
  Eigen::Quaterniond alignment = Eigen::Quaterniond::Identity();

  /// Throws InvalidArgument or UnknownFrame when the map does not fit `chain`.
  void validate(const KinematicChain& chain) const;
};

RetargetMap parse_retarget_map(const nlohmann::json& doc);
RetargetMap load_retarget_map(const std::string& path);
nlohmann::json to_json(const RetargetMap& map);

struct RetargetParams {
  /// Human-to-robot hand size ratio.
  double alpha = 1.0;
  /// Weight on |q_t - q_{t-1}|^2.
  double beta = 0.0;
  int max_iters = 100;
  /// Projected-gradient optimality threshold.
  double tol = 1e-10;
};

struct RetargetState {
  Configuration q_prev;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static RetargetState from_chain(const KinematicChain& chain);
};

struct RetargetResult {
  Configuration q;
  double objective = 0.0;
  /// |q - clamp(q - grad)|_inf at the returned point.
  double optimality = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Wrist-relative keypoint vectors, rotated into the wrist frame, aligned
/// to the robot hand and multiplied by the frame's scale.
std::vector<Eigen::Vector3d> keypoint_vectors(const HandFrame& frame, const RetargetMap& map);

/// sum_i |alpha v_i - f_i(q)|^2 + beta |q - q_prev|^2
double retarget_objective(const KinematicChain& chain, const std::vector<Eigen::Vector3d>& vectors,
                          const RetargetMap& map, const RetargetState& state, const RetargetParams& params,
                          const Configuration& q);

/// Projected Gauss-Newton on the bounded keypoint-matching problem, warm
/// started at state.q_prev, with a projected-gradient fallback when a
/// Gauss-Newton step fails to decrease the objective.
RetargetResult solve_retarget(const KinematicChain& chain, const HandFrame& frame, const RetargetMap& map,
                              const RetargetState& state, const RetargetParams& params);

/// Stateful per-hand retargeter: each active frame is solved warm-started
/// from the previous output; inactive frames repeat the last output.
class RetargetStream {
 public:
  RetargetStream(const KinematicChain& chain, RetargetMap map, RetargetState state, RetargetParams params);

  const Configuration& step(const HandFrame& frame);
  const RetargetState& state() const { return state_; }
  const RetargetResult& last_result() const { return last_; }

 private:
  KinematicChain chain_;
  RetargetMap map_;
  RetargetState state_;
  RetargetParams params_;
  RetargetResult last_;
};

std::vector<Configuration> step_stream(const KinematicChain& chain, const std::vector<HandFrame>& frames,
                                       const RetargetMap& map, const RetargetState& initial,
                                       const RetargetParams& params);

}  // namespace xrt
