#include "xrteleop/ik.hpp"

#include <algorithm>
#include <cmath>

#include "xrteleop/box_qp.hpp"
#include "xrteleop/error.hpp"

namespace xrt {
namespace {

constexpr double kDampingFloor = 1e-9;

Eigen::Vector3d clamp_norm(const Eigen::Vector3d& v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm && n > 0.0) return v * (max_norm / n);
  return v;
}

}  // namespace

Task Task::pose(std::string frame, const Pose& target, double weight) {
  return Task{std::move(frame), target, weight, RowSelection::all(), TaskKind::FramePose};
}

Task Task::position(std::string frame, const Eigen::Vector3d& target, double weight) {
  return Task{std::move(frame), Pose::from_translation(target), weight, RowSelection::position(),
              TaskKind::FramePosition};
}

ConstraintSet ConstraintSet::from_chain(const KinematicChain& chain, double limit_horizon) {
  return ConstraintSet{chain.lower_limits(), chain.upper_limits(), chain.velocity_limits(), limit_horizon};
}

Eigen::VectorXd pose_error(const Pose& current, const Pose& target, const RowSelection& rows,
                           std::optional<double> max_norm) {
  Eigen::Vector3d dp = target.position - current.position;
  Eigen::Vector3d dr = rotation_log(target.orientation * current.orientation.conjugate());
  if (max_norm) {
    dp = clamp_norm(dp, *max_norm);
    dr = clamp_norm(dr, *max_norm);
  }
  Eigen::Matrix<double, 6, 1> full;
  full << dp, dr;
  return rows.select(full);
}

VelocityBounds velocity_bounds(const Configuration& q, const ConstraintSet& constraints) {
  const Eigen::Index n = q.size();
  if (constraints.lower.size() != n || constraints.upper.size() != n || constraints.velocity.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "constraint set is not sized to the configuration");
  }
  if (!(constraints.limit_horizon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "limit_horizon must be > 0");
  }
  VelocityBounds out;
  out.lower.resize(n);
  out.upper.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (constraints.lower[j] > constraints.upper[j] || constraints.velocity[j] < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "constraint bounds are not ordered");
    }
    const double h = constraints.limit_horizon;
    out.lower[j] = std::max(-constraints.velocity[j], (constraints.lower[j] - q[j]) / h);
    out.upper[j] = std::min(constraints.velocity[j], (constraints.upper[j] - q[j]) / h);
    if (out.lower[j] > out.upper[j]) {
      out.infeasible.push_back(static_cast<int>(j));
      out.lower[j] = 0.0;
      out.upper[j] = 0.0;
    }
  }
  return out;
}

IkSolution solve_dik(const KinematicChain& chain, const Configuration& q, const std::vector<Task>& tasks,
                     const ConstraintSet& constraints, const IkParams& params) {
  if (q.size() != chain.dof()) throw Error(ErrorCode::DimensionMismatch, "configuration size != dof");
  if (!(params.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  if (!(params.damping >= 0.0) || !(params.manipulability_weight >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "IK weights must be finite and >= 0");
  }

  const int n = chain.dof();
  const double damping = std::max(params.damping, kDampingFloor);
  const std::vector<Pose> poses = chain.link_poses(q);
  const std::optional<double> clamp =
      std::isfinite(params.max_task_speed) ? std::optional<double>(params.max_task_speed * params.dt)
                                           : std::nullopt;

  // 0.5 x'Hx + g'x equals the objective up to a constant.
  Eigen::MatrixXd hessian = 2.0 * damping * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(n);
  bool clipped = false;

  struct Term {
    Eigen::MatrixXd jac;
    Eigen::VectorXd residual;
    double weight;
  };
  std::vector<Term> terms;
  terms.reserve(tasks.size());

  for (const Task& task : tasks) {
    if (!(task.weight > 0.0) || !std::isfinite(task.weight)) {
      throw Error(ErrorCode::InvalidArgument, "task weight must be finite and > 0");
    }
    if (task.rows.empty()) throw Error(ErrorCode::InvalidArgument, "task selects no rows");
    const auto link = chain.link_index(task.frame);
    if (!link) throw Error(ErrorCode::UnknownFrame, "no link named '" + task.frame + "'");
    const Pose& current = poses[static_cast<std::size_t>(*link)];

    const Eigen::VectorXd raw = pose_error(current, task.target, task.rows);
    const Eigen::VectorXd displacement = pose_error(current, task.target, task.rows, clamp);
    if (clamp && raw != displacement) clipped = true;

    Term term{task.rows.select(jacobian(chain, q, task.frame).matrix), -displacement / params.dt, task.weight};
    hessian.noalias() += 2.0 * term.weight * term.jac.transpose() * term.jac;
    gradient.noalias() += 2.0 * term.weight * term.jac.transpose() * term.residual;
    terms.push_back(std::move(term));
  }

  Eigen::VectorXd manip_grad = Eigen::VectorXd::Zero(n);
  if (params.manipulability_weight > 0.0 && n > 0) {
    std::string frame = params.manipulability_frame;
    if (frame.empty() && !tasks.empty()) frame = tasks.front().frame;
    if (!frame.empty()) {
      manip_grad = manipulability_gradient(chain, q, frame, params.manipulability_rows,
                                           params.manipulability_fd_step);
      gradient -= params.manipulability_weight * manip_grad;
    }
  }

  const VelocityBounds bounds = velocity_bounds(q, constraints);
  const BoxQpResult qp = solve_box_qp(hessian, gradient, bounds.lower, bounds.upper);

  IkSolution sol;
  sol.qdot = qp.x;
  sol.relaxed = bounds.infeasible;
  sol.kkt_residual = box_qp_kkt_residual(hessian, gradient, bounds.lower, bounds.upper, qp.x);
  for (int j = 0; j < n; ++j) {
    const bool pinned = std::find(sol.relaxed.begin(), sol.relaxed.end(), j) != sol.relaxed.end();
    if (pinned) continue;
    const bool lower_active = std::isfinite(bounds.lower[j]) && qp.x[j] == bounds.lower[j];
    const bool upper_active = std::isfinite(bounds.upper[j]) && qp.x[j] == bounds.upper[j];
    if (lower_active || upper_active) sol.active_constraints.push_back(j);
  }

  double objective = damping * qp.x.squaredNorm() - params.manipulability_weight * manip_grad.dot(qp.x);
  for (const Term& t : terms) objective += t.weight * (t.jac * qp.x + t.residual).squaredNorm();
  sol.objective = objective;

  if (!sol.relaxed.empty()) {
    sol.status = IkStatus::InfeasibleRelaxed;
  } else if (clipped) {
    sol.status = IkStatus::Clipped;
  } else {
    sol.status = IkStatus::Optimal;
  }
  return sol;
}

Integration integrate(const Configuration& q, const Eigen::VectorXd& qdot, double dt,
                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (qdot.size() != q.size() || lower.size() != q.size() || upper.size() != q.size()) {
    throw Error(ErrorCode::DimensionMismatch, "integrate operands disagree in size");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  Integration out;
  out.q = q + qdot * dt;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (out.q[j] > upper[j]) {
      out.q[j] = upper[j];
      out.clamped.push_back(static_cast<int>(j));
    } else if (out.q[j] < lower[j]) {
      out.q[j] = lower[j];
      out.clamped.push_back(static_cast<int>(j));
    }
  }
  return out;
}

}  // namespace xrt
