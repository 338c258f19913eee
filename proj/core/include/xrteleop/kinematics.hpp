#pragma once

#include <bitset>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "xrteleop/pose.hpp"

namespace xrt {

/// Joint positions (rad or m), one entry per non-fixed joint in chain order.
using Configuration = Eigen::VectorXd;

enum class JointKind { Revolute, Prismatic, Fixed };

std::string_view to_string(JointKind kind) noexcept;

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::Fixed;
  std::string parent_link;
  std::string child_link;
  /// Unit axis expressed in the joint frame (after `origin`).
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  /// Parent link frame -> joint frame at zero displacement.
  Pose origin;
  /// Roll/pitch/yaw as written in the source document; serialization
  /// reuses it so parse and serialize round-trip exactly.
  std::optional<Eigen::Vector3d> origin_rpy;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double velocity_limit = std::numeric_limits<double>::infinity();
};

/// Subset of the six task-space rows [vx vy vz wx wy wz].
class RowSelection {
 public:
  RowSelection() = default;
  RowSelection(std::initializer_list<int> rows);

  static RowSelection all() { return {0, 1, 2, 3, 4, 5}; }
  static RowSelection position() { return {0, 1, 2}; }
  static RowSelection orientation() { return {3, 4, 5}; }

  bool contains(int row) const { return bits_.test(static_cast<std::size_t>(row)); }
  int count() const { return static_cast<int>(bits_.count()); }
  bool empty() const { return bits_.none(); }
  std::vector<int> indices() const;

  /// Picks the selected rows of a 6-row matrix or 6-vector.
  Eigen::MatrixXd select(const Eigen::Ref<const Eigen::MatrixXd>& full) const;

  bool operator==(const RowSelection&) const = default;

 private:
  std::bitset<6> bits_;
};

struct Jacobian {
  /// Rows are [linear xyz; angular xyz] in the world frame.
  Eigen::Matrix<double, 6, Eigen::Dynamic> matrix;
  std::string frame;
};

/// A rooted tree of joints and links. Joints are stored in depth-first
/// order from the root so every parent precedes its children; the
/// configuration vector follows the same order, skipping fixed joints.
class KinematicChain {
 public:
  KinematicChain() = default;
  /// Throws DanglingReference, CyclicStructure, MalformedDocument or
  /// InvalidArgument when the description does not form a valid tree.
  KinematicChain(std::string name, std::vector<std::string> links, std::vector<JointSpec> joints);

  const std::string& name() const { return name_; }
  int dof() const { return dof_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<std::string>& links() const { return links_; }
  const std::string& root_link() const { return links_.at(root_); }

  std::optional<int> link_index(std::string_view link) const;
  bool has_link(std::string_view link) const { return link_index(link).has_value(); }

  /// Index of the joint whose child is `link`, or -1 for the root.
  int parent_joint_of_link(int link) const { return link_parent_joint_[static_cast<std::size_t>(link)]; }
  /// Index of the joint feeding joint `joint`'s parent link, or -1.
  int parent_joint(int joint) const { return joint_parent_[static_cast<std::size_t>(joint)]; }
  /// Configuration index of a joint, or -1 for fixed joints.
  int variable_index(int joint) const { return joint_variable_[static_cast<std::size_t>(joint)]; }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  Eigen::VectorXd velocity_limits() const;

  /// Zero clamped into the joint limits.
  Configuration neutral_configuration() const;

  /// World pose of every link, indexed like links().
  std::vector<Pose> link_poses(const Configuration& q) const;

 private:
  friend Jacobian jacobian(const KinematicChain&, const Configuration&, std::string_view);

  void check_configuration(const Configuration& q) const;
  /// Joint frame poses (before the joint's own motion) plus link poses.
  void evaluate(const Configuration& q, std::vector<Pose>& joint_frames, std::vector<Pose>& link_frames) const;

  std::string name_;
  std::vector<std::string> links_;
  std::vector<JointSpec> joints_;
  std::unordered_map<std::string, int> link_lookup_;
  std::vector<int> link_parent_joint_;
  std::vector<int> joint_parent_;
  std::vector<int> joint_parent_link_;
  std::vector<int> joint_child_link_;
  std::vector<int> joint_variable_;
  int root_ = 0;
  int dof_ = 0;
};

/// World pose of `frame`. Throws UnknownFrame or DimensionMismatch.
Pose forward_kinematics(const KinematicChain& chain, const Configuration& q, std::string_view frame);

/// Geometric Jacobian of `frame`'s origin in world coordinates.
Jacobian jacobian(const KinematicChain& chain, const Configuration& q, std::string_view frame);

/// sqrt(det(J_s J_s^T)) over the selected rows; 0 when the selection has
/// more rows than the Jacobian has columns.
double manipulability(const Jacobian& jac, const RowSelection& rows);

/// Central finite-difference gradient of manipulability with respect to q.
Eigen::VectorXd manipulability_gradient(const KinematicChain& chain, const Configuration& q,
                                        std::string_view frame, const RowSelection& rows,
                                        double step = 1e-6);

// Chain description documents (robot/link/joint XML subset).

/// Parses the supported subset. Unknown elements are skipped and reported
/// through `warnings` when provided.
KinematicChain parse_chain(std::string_view text, std::vector<std::string>* warnings = nullptr);
KinematicChain load_chain(const std::string& path, std::vector<std::string>* warnings = nullptr);
std::string serialize_chain(const KinematicChain& chain);

}  // namespace xrt
