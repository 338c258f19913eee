#include <cmath>
#include <functional>

#include "xrteleop/error.hpp"
#include "xrteleop/kinematics.hpp"

namespace xrt {

std::string_view to_string(JointKind kind) noexcept {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Fixed: return "fixed";
  }
  return "fixed";
}

RowSelection::RowSelection(std::initializer_list<int> rows) {
  for (int r : rows) {
    if (r < 0 || r > 5) throw Error(ErrorCode::InvalidArgument, "row index out of range");
    bits_.set(static_cast<std::size_t>(r));
  }
}

std::vector<int> RowSelection::indices() const {
  std::vector<int> out;
  for (int r = 0; r < 6; ++r) {
    if (contains(r)) out.push_back(r);
  }
  return out;
}

Eigen::MatrixXd RowSelection::select(const Eigen::Ref<const Eigen::MatrixXd>& full) const {
  Eigen::MatrixXd out(count(), full.cols());
  int k = 0;
  for (int r = 0; r < 6; ++r) {
    if (contains(r)) out.row(k++) = full.row(r);
  }
  return out;
}

KinematicChain::KinematicChain(std::string name, std::vector<std::string> links,
                               std::vector<JointSpec> joints)
    : name_(std::move(name)), links_(std::move(links)) {
  if (links_.empty()) throw Error(ErrorCode::MalformedDocument, "chain has no links");

  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (!link_lookup_.emplace(links_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::MalformedDocument, "duplicate link '" + links_[i] + "'");
    }
  }

  std::unordered_map<std::string, int> joint_names;
  std::vector<int> parent_joint_of(links_.size(), -1);
  std::vector<std::vector<int>> children(links_.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    JointSpec& js = joints[j];
    if (!joint_names.emplace(js.name, static_cast<int>(j)).second) {
      throw Error(ErrorCode::MalformedDocument, "duplicate joint '" + js.name + "'");
    }
    auto parent = link_lookup_.find(js.parent_link);
    if (parent == link_lookup_.end()) {
      throw Error(ErrorCode::DanglingReference,
                  "joint '" + js.name + "' names missing parent link '" + js.parent_link + "'");
    }
    auto child = link_lookup_.find(js.child_link);
    if (child == link_lookup_.end()) {
      throw Error(ErrorCode::DanglingReference,
                  "joint '" + js.name + "' names missing child link '" + js.child_link + "'");
    }
    if (parent_joint_of[static_cast<std::size_t>(child->second)] != -1) {
      throw Error(ErrorCode::CyclicStructure, "link '" + js.child_link + "' has more than one parent joint");
    }
    parent_joint_of[static_cast<std::size_t>(child->second)] = static_cast<int>(j);
    children[static_cast<std::size_t>(parent->second)].push_back(static_cast<int>(j));

    if (js.kind != JointKind::Fixed) {
      const double n = js.axis.norm();
      if (!std::isfinite(n) || n < 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "joint '" + js.name + "' has a degenerate axis");
      }
      if (std::abs(n * n - 1.0) > 1e-12) js.axis /= n;
    }
    if (js.lower > js.upper) {
      throw Error(ErrorCode::InvalidArgument, "joint '" + js.name + "' has lower > upper");
    }
    if (js.velocity_limit < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "joint '" + js.name + "' has a negative velocity limit");
    }
  }

  std::vector<int> roots;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (parent_joint_of[l] == -1) roots.push_back(static_cast<int>(l));
  }
  if (roots.empty()) throw Error(ErrorCode::CyclicStructure, "no root link: parent graph is cyclic");
  if (roots.size() > 1) {
    throw Error(ErrorCode::MalformedDocument,
                "disconnected description: links '" + links_[static_cast<std::size_t>(roots[0])] + "' and '" +
                    links_[static_cast<std::size_t>(roots[1])] + "' both lack a parent");
  }
  root_ = roots.front();

  // Depth-first preorder from the root; siblings keep document order.
  std::vector<int> order;
  order.reserve(joints.size());
  std::function<void(int)> visit = [&](int link) {
    for (int j : children[static_cast<std::size_t>(link)]) {
      order.push_back(j);
      visit(link_lookup_.at(joints[static_cast<std::size_t>(j)].child_link));
    }
  };
  visit(root_);
  if (order.size() != joints.size()) {
    throw Error(ErrorCode::CyclicStructure, "some joints are unreachable from the root (cycle)");
  }

  joints_.reserve(joints.size());
  for (int j : order) joints_.push_back(std::move(joints[static_cast<std::size_t>(j)]));

  link_parent_joint_.assign(links_.size(), -1);
  joint_parent_.resize(joints_.size());
  joint_parent_link_.resize(joints_.size());
  joint_child_link_.resize(joints_.size());
  joint_variable_.resize(joints_.size());
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const int child = link_lookup_.at(joints_[j].child_link);
    const int parent = link_lookup_.at(joints_[j].parent_link);
    link_parent_joint_[static_cast<std::size_t>(child)] = static_cast<int>(j);
    joint_child_link_[j] = child;
    joint_parent_link_[j] = parent;
  }
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    joint_parent_[j] = link_parent_joint_[static_cast<std::size_t>(joint_parent_link_[j])];
    joint_variable_[j] = joints_[j].kind == JointKind::Fixed ? -1 : dof_++;
  }
}

std::optional<int> KinematicChain::link_index(std::string_view link) const {
  auto it = link_lookup_.find(std::string(link));
  if (it == link_lookup_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd KinematicChain::lower_limits() const {
  Eigen::VectorXd out(dof_);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joint_variable_[j] >= 0) out[joint_variable_[j]] = joints_[j].lower;
  }
  return out;
}

Eigen::VectorXd KinematicChain::upper_limits() const {
  Eigen::VectorXd out(dof_);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joint_variable_[j] >= 0) out[joint_variable_[j]] = joints_[j].upper;
  }
  return out;
}

Eigen::VectorXd KinematicChain::velocity_limits() const {
  Eigen::VectorXd out(dof_);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joint_variable_[j] >= 0) out[joint_variable_[j]] = joints_[j].velocity_limit;
  }
  return out;
}

Configuration KinematicChain::neutral_configuration() const {
  return Configuration::Zero(dof_).cwiseMax(lower_limits()).cwiseMin(upper_limits());
}

void KinematicChain::check_configuration(const Configuration& q) const {
  if (q.size() != dof_) {
    throw Error(ErrorCode::DimensionMismatch, "configuration has " + std::to_string(q.size()) +
                                                  " entries, chain '" + name_ + "' has dof " +
                                                  std::to_string(dof_));
  }
}

void KinematicChain::evaluate(const Configuration& q, std::vector<Pose>& joint_frames,
                              std::vector<Pose>& link_frames) const {
  joint_frames.resize(joints_.size());
  link_frames.assign(links_.size(), Pose::identity());
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const JointSpec& js = joints_[j];
    const Pose& parent = link_frames[static_cast<std::size_t>(joint_parent_link_[j])];
    joint_frames[j] = compose(parent, js.origin);
    Pose motion;
    const int v = joint_variable_[j];
    if (js.kind == JointKind::Revolute) {
      motion.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(q[v], js.axis));
    } else if (js.kind == JointKind::Prismatic) {
      motion.position = js.axis * q[v];
    }
    link_frames[static_cast<std::size_t>(joint_child_link_[j])] = compose(joint_frames[j], motion);
  }
}

std::vector<Pose> KinematicChain::link_poses(const Configuration& q) const {
  check_configuration(q);
  std::vector<Pose> joint_frames;
  std::vector<Pose> link_frames;
  evaluate(q, joint_frames, link_frames);
  return link_frames;
}

Pose forward_kinematics(const KinematicChain& chain, const Configuration& q, std::string_view frame) {
  const auto link = chain.link_index(frame);
  if (!link) throw Error(ErrorCode::UnknownFrame, "no link named '" + std::string(frame) + "'");
  return chain.link_poses(q)[static_cast<std::size_t>(*link)];
}

Jacobian jacobian(const KinematicChain& chain, const Configuration& q, std::string_view frame) {
  const auto link = chain.link_index(frame);
  if (!link) throw Error(ErrorCode::UnknownFrame, "no link named '" + std::string(frame) + "'");
  chain.check_configuration(q);

  std::vector<Pose> joint_frames;
  std::vector<Pose> link_frames;
  chain.evaluate(q, joint_frames, link_frames);

  Jacobian out;
  out.frame = std::string(frame);
  out.matrix.setZero(6, chain.dof());
  const Eigen::Vector3d tip = link_frames[static_cast<std::size_t>(*link)].position;

  for (int j = chain.parent_joint_of_link(*link); j >= 0; j = chain.parent_joint(j)) {
    const int v = chain.variable_index(j);
    if (v < 0) continue;
    const JointSpec& js = chain.joints()[static_cast<std::size_t>(j)];
    const Pose& jf = joint_frames[static_cast<std::size_t>(j)];
    const Eigen::Vector3d axis = jf.orientation * js.axis;
    if (js.kind == JointKind::Revolute) {
      out.matrix.block<3, 1>(0, v) = axis.cross(tip - jf.position);
      out.matrix.block<3, 1>(3, v) = axis;
    } else {
      out.matrix.block<3, 1>(0, v) = axis;
    }
  }
  return out;
}

}  // namespace xrt
