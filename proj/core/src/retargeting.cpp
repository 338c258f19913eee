#include "xrteleop/retargeting.hpp"

#include <cmath>

#include "xrteleop/box_qp.hpp"
#include "xrteleop/error.hpp"

namespace xrt {
namespace {

constexpr std::array<std::string_view, kHandJointCount> kHandJointNames = {
    "Palm",           "Wrist",          "ThumbMetacarpal",    "ThumbProximal",  "ThumbDistal",
    "ThumbTip",       "IndexMetacarpal", "IndexProximal",     "IndexIntermediate", "IndexDistal",
    "IndexTip",       "MiddleMetacarpal", "MiddleProximal",   "MiddleIntermediate", "MiddleDistal",
    "MiddleTip",      "RingMetacarpal", "RingProximal",       "RingIntermediate", "RingDistal",
    "RingTip",        "LittleMetacarpal", "LittleProximal",   "LittleIntermediate", "LittleDistal",
    "LittleTip",
};

bool in_range(int index) { return index >= 0 && index < kHandJointCount; }

/// Residuals r = [f_i(q) - alpha v_i ...; sqrt(beta)(q - q_prev)] and their Jacobian.
struct Linearization {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jac;
};

Linearization linearize(const KinematicChain& chain, const std::vector<Eigen::Vector3d>& vectors,
                        const RetargetMap& map, const RetargetState& state, const RetargetParams& params,
                        const Configuration& q, bool with_jacobian) {
  const int n = chain.dof();
  const auto m = static_cast<Eigen::Index>(3 * map.pairs.size());
  Linearization lin;
  lin.residual.resize(m + n);
  if (with_jacobian) lin.jac.setZero(m + n, n);

  const std::vector<Pose> poses = chain.link_poses(q);
  for (std::size_t i = 0; i < map.pairs.size(); ++i) {
    const KeypointPair& pair = map.pairs[i];
    const std::string& ref = pair.robot_reference_frame.empty() ? chain.root_link() : pair.robot_reference_frame;
    const int tip_link = *chain.link_index(pair.robot_frame);
    const int ref_link = *chain.link_index(ref);
    const Eigen::Vector3d f =
        poses[static_cast<std::size_t>(tip_link)].position - poses[static_cast<std::size_t>(ref_link)].position;
    const auto row = static_cast<Eigen::Index>(3 * i);
    lin.residual.segment<3>(row) = f - params.alpha * vectors[i];
    if (with_jacobian) {
      lin.jac.block(row, 0, 3, n) = jacobian(chain, q, pair.robot_frame).matrix.topRows<3>() -
                                    jacobian(chain, q, ref).matrix.topRows<3>();
    }
  }
  const double sb = std::sqrt(params.beta);
  lin.residual.tail(n) = sb * (q - state.q_prev);
  if (with_jacobian) lin.jac.bottomRows(n) = sb * Eigen::MatrixXd::Identity(n, n);
  return lin;
}

double optimality(const Configuration& q, const Eigen::VectorXd& grad, const RetargetState& state) {
  if (q.size() == 0) return 0.0;
  const Eigen::VectorXd projected = (q - grad).cwiseMax(state.lower).cwiseMin(state.upper);
  return (q - projected).lpNorm<Eigen::Infinity>();
}

Configuration project(const Configuration& q, const RetargetState& state) {
  return q.cwiseMax(state.lower).cwiseMin(state.upper);
}

}  // namespace

std::string_view hand_joint_name(int index) {
  if (!in_range(index)) throw Error(ErrorCode::InvalidArgument, "hand joint index out of range");
  return kHandJointNames[static_cast<std::size_t>(index)];
}

std::optional<int> hand_joint_index(std::string_view name) {
  for (int i = 0; i < kHandJointCount; ++i) {
    if (kHandJointNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

void RetargetMap::validate(const KinematicChain& chain) const {
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "retarget map has no pairs");
  for (const KeypointPair& p : pairs) {
    if (!in_range(p.human_keypoint) || !in_range(p.reference_keypoint)) {
      throw Error(ErrorCode::InvalidArgument, "retarget keypoint index out of range");
    }
    if (!chain.has_link(p.robot_frame)) {
      throw Error(ErrorCode::UnknownFrame, "retarget frame '" + p.robot_frame + "' not in chain");
    }
    if (!p.robot_reference_frame.empty() && !chain.has_link(p.robot_reference_frame)) {
      throw Error(ErrorCode::UnknownFrame, "retarget reference '" + p.robot_reference_frame + "' not in chain");
    }
  }
}

RetargetState RetargetState::from_chain(const KinematicChain& chain) {
  return RetargetState{chain.neutral_configuration(), chain.lower_limits(), chain.upper_limits()};
}

std::vector<Eigen::Vector3d> keypoint_vectors(const HandFrame& frame, const RetargetMap& map) {
  if (!frame.is_active) throw Error(ErrorCode::InactiveFrame, "hand frame is not active");
  const Eigen::Quaterniond to_local =
      map.alignment.normalized() * frame.joints[static_cast<std::size_t>(HandJoint::Wrist)].pose.orientation.conjugate();
  std::vector<Eigen::Vector3d> out;
  out.reserve(map.pairs.size());
  for (const KeypointPair& p : map.pairs) {
    if (!in_range(p.human_keypoint) || !in_range(p.reference_keypoint)) {
      throw Error(ErrorCode::InvalidArgument, "retarget keypoint index out of range");
    }
    const Eigen::Vector3d d = frame.joints[static_cast<std::size_t>(p.human_keypoint)].pose.position -
                              frame.joints[static_cast<std::size_t>(p.reference_keypoint)].pose.position;
    out.push_back(frame.scale * (to_local * d));
  }
  return out;
}

double retarget_objective(const KinematicChain& chain, const std::vector<Eigen::Vector3d>& vectors,
                          const RetargetMap& map, const RetargetState& state, const RetargetParams& params,
                          const Configuration& q) {
  return linearize(chain, vectors, map, state, params, q, false).residual.squaredNorm();
}

RetargetResult solve_retarget(const KinematicChain& chain, const HandFrame& frame, const RetargetMap& map,
                              const RetargetState& state, const RetargetParams& params) {
  const int n = chain.dof();
  if (state.q_prev.size() != n || state.lower.size() != n || state.upper.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "retarget state is not sized to the hand chain");
  }
  if (!(params.alpha > 0.0) || !(params.beta >= 0.0) || !(params.tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "retarget params out of range");
  }
  map.validate(chain);
  const std::vector<Eigen::Vector3d> vectors = keypoint_vectors(frame, map);

  RetargetResult result;
  result.q = project(state.q_prev, state);
  if (n == 0) {
    result.converged = true;
    result.objective = retarget_objective(chain, vectors, map, state, params, result.q);
    return result;
  }
  Linearization lin = linearize(chain, vectors, map, state, params, result.q, true);
  double cost = lin.residual.squaredNorm();
  Eigen::VectorXd grad = 2.0 * lin.jac.transpose() * lin.residual;

  for (result.iterations = 0; result.iterations < params.max_iters; ++result.iterations) {
    result.optimality = optimality(result.q, grad, state);
    if (result.optimality < params.tol) {
      result.converged = true;
      break;
    }

    // Gauss-Newton step restricted to the box, solved as a bounded QP.
    const Eigen::MatrixXd jtj = lin.jac.transpose() * lin.jac;
    const double mu = 1e-12 * std::max(1.0, jtj.diagonal().maxCoeff());
    const Eigen::MatrixXd hessian = jtj + mu * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd g = lin.jac.transpose() * lin.residual;
    const BoxQpResult step = solve_box_qp(hessian, g, state.lower - result.q, state.upper - result.q);

    bool improved = false;
    Configuration candidate;
    double candidate_cost = cost;
    for (double t = 1.0; t > 1e-10; t *= 0.5) {
      candidate = project(result.q + t * step.x, state);
      candidate_cost = retarget_objective(chain, vectors, map, state, params, candidate);
      if (candidate_cost < cost) {
        improved = true;
        break;
      }
    }

    if (!improved) {
      // Projected gradient with Armijo backtracking.
      for (double s = 1.0; s > 1e-14; s *= 0.5) {
        candidate = project(result.q - s * grad, state);
        candidate_cost = retarget_objective(chain, vectors, map, state, params, candidate);
        if (candidate_cost <= cost - 1e-4 * grad.dot(result.q - candidate)) {
          improved = candidate_cost < cost;
          break;
        }
      }
    }
    if (!improved) {
      // No descent available at machine precision.
      result.converged = result.optimality < std::sqrt(params.tol);
      break;
    }

    result.q = candidate;
    lin = linearize(chain, vectors, map, state, params, result.q, true);
    cost = lin.residual.squaredNorm();
    grad = 2.0 * lin.jac.transpose() * lin.residual;
  }
  result.optimality = optimality(result.q, grad, state);
  result.objective = cost;
  return result;
}

RetargetStream::RetargetStream(const KinematicChain& chain, RetargetMap map, RetargetState state,
                               RetargetParams params)
    : chain_(chain), map_(std::move(map)), state_(std::move(state)), params_(params) {
  map_.validate(chain_);
  last_.q = state_.q_prev;
}

const Configuration& RetargetStream::step(const HandFrame& frame) {
  if (!frame.is_active) return state_.q_prev;
  last_ = solve_retarget(chain_, frame, map_, state_, params_);
  state_.q_prev = last_.q;
  return state_.q_prev;
}

std::vector<Configuration> step_stream(const KinematicChain& chain, const std::vector<HandFrame>& frames,
                                       const RetargetMap& map, const RetargetState& initial,
                                       const RetargetParams& params) {
  RetargetStream stream(chain, map, initial, params);
  std::vector<Configuration> out;
  out.reserve(frames.size());
  for (const HandFrame& f : frames) out.push_back(stream.step(f));
  return out;
}

}  // namespace xrt
