#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "xrteleop/kinematics.hpp"
#include "xrteleop/protocol.hpp"
#include "xrteleop/retargeting.hpp"
#include "xrteleop/session.hpp"
#include "xrteleop/simrobot.hpp"

namespace xrt::testing {

std::string data_path(const std::string& relative);
std::string read_file(const std::string& path);

/// Random tree with up to `max_dof` moving joints, mixing revolute,
/// prismatic and fixed joints with random origins and axes. Roughly one
/// chain in three branches.
KinematicChain random_chain(std::mt19937_64& rng, int max_dof);
Configuration random_configuration(const KinematicChain& chain, std::mt19937_64& rng);

/// Central-difference Jacobian built from forward kinematics alone.
Eigen::Matrix<double, 6, Eigen::Dynamic> fd_jacobian(const KinematicChain& chain, const Configuration& q,
                                                     const std::string& frame, double h = 1e-6);

/// Packet with every optional section filled at random (each present with
/// probability 1/2), unit quaternions, in-range scalars.
TrackingPacket random_packet(std::mt19937_64& rng);
/// Every section present.
TrackingPacket full_packet(std::mt19937_64& rng);

/// Hand frame with the wrist at `wrist` and the given joints placed at
/// wrist-frame offsets; other joints sit on the wrist.
HandFrame hand_frame(const Pose& wrist, const std::vector<std::pair<int, Eigen::Vector3d>>& offsets,
                     double scale = 1.0);

/// Right-controller session sampled at `rate_hz`: the grip is held for the
/// whole run and the controller follows `path(t)` (XR frame, t in seconds).
/// Receive stamps are exact multiples of the period.
std::vector<SessionEntry> scripted_session(const std::function<Pose(double)>& path, double seconds,
                                           double rate_hz = 90.0);

/// Per-tick tracking errors of the first configured arm during an offline
/// run. `target_*` compares the end effector after the tick with the target
/// that tick solved for; `ideal_*` compares it with where the operator's
/// controller actually was at that simulated time.
struct LoopTrace {
  std::vector<double> time_s;
  std::vector<double> target_position;
  std::vector<double> target_angle;
  std::vector<double> ideal_position;
  std::vector<double> ideal_angle;
  /// Commanded end-effector target per tick (empty pose before engage).
  std::vector<Pose> targets;
  std::vector<Pose> ee;
  OfflineResult result;
};
LoopTrace track_arm(const TeleopConfig& config, const std::vector<SessionEntry>& session,
                    const std::function<Pose(double)>& path, double path_seconds, OfflineOptions options = {});

/// Each field of the tracking table as a JSON path into an encoded packet
/// ("#" stands for the first array element), plus the schema definition
/// that must declare it.
struct TableField {
  std::vector<std::string> path;
  std::string def;
};
std::vector<TableField> tracking_table_fields();
/// Every section present, both hands active with 26 joints.
TrackingPacket covering_packet();
/// For each table field: declared and required by the schema, emitted by
/// the encoder, and rejected by both codec and schema when removed or
/// replaced with a wrongly typed value. Returns one message per gap.
std::vector<std::string> table_coverage_gaps(const nlohmann::json& schema);

/// Validates `doc` against the JSON-schema subset used by the packet
/// schema: type, enum, required, properties, items, min/maxItems,
/// minimum, maximum, exclusiveMinimum, minLength, pattern, oneOf, $ref.
/// Returns the list of violations (empty when valid).
std::vector<std::string> schema_errors(const nlohmann::json& schema, const nlohmann::json& doc);

}  // namespace xrt::testing
