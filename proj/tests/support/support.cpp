#include "support.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <iterator>
#include <numbers>
#include <regex>
#include <stdexcept>

#include "xrteleop/error.hpp"
#include "xrteleop/ik.hpp"
#include "xrteleop/pose.hpp"

namespace xrt::testing {

std::string data_path(const std::string& relative) { return std::string(XRT_TEST_DATA_DIR) + "/" + relative; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Quaterniond random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

Pose7 random_pose7(std::mt19937_64& rng) {
  const Eigen::Quaterniond q = random_quaternion(rng);
  return to_pose7(Pose(Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)), q));
}

Vector6 random_vector6(std::mt19937_64& rng) {
  Vector6 v{};
  for (double& x : v) x = uniform(rng, -5, 5);
  return v;
}

ControllerState random_controller(std::mt19937_64& rng) {
  ControllerState c;
  c.pose = random_pose7(rng);
  c.axis_x = uniform(rng, -1, 1);
  c.axis_y = uniform(rng, -1, 1);
  c.axis_click = rng() & 1;
  c.grip = uniform(rng, 0, 1);
  c.trigger = uniform(rng, 0, 1);
  c.primary_button = rng() & 1;
  c.secondary_button = rng() & 1;
  c.menu_button = rng() & 1;
  return c;
}

HandState random_hand(std::mt19937_64& rng) {
  HandState h;
  h.is_active = rng() & 1;
  h.scale = uniform(rng, 0.5, 1.5);
  if (h.is_active || (rng() & 1)) {
    for (int i = 0; i < 26; ++i) {
      h.joints.push_back({random_pose7(rng), static_cast<std::uint32_t>(rng() % 16), uniform(rng, 0.0, 0.02)});
    }
  }
  return h;
}

BodyState random_body(std::mt19937_64& rng) {
  BodyState b;
  for (int i = 0; i < kBodyJointCount; ++i) b.joints.push_back({random_pose7(rng), random_vector6(rng), random_vector6(rng)});
  return b;
}

TrackingPacket packet(std::mt19937_64& rng, bool all) {
  auto present = [&] { return all || (rng() & 1); };
  TrackingPacket p;
  p.timestamp_ns = static_cast<std::int64_t>(rng() >> 2);
  p.sequence = rng() >> (rng() % 64);
  p.head.pose = random_pose7(rng);
  p.head.status = static_cast<int>(rng() % 2);
  p.head.hand_mode = static_cast<int>(rng() % 3);
  if (present()) p.left_controller = random_controller(rng);
  if (present()) p.right_controller = random_controller(rng);
  if (present()) p.left_hand = random_hand(rng);
  if (present()) p.right_hand = random_hand(rng);
  if (present()) p.body = random_body(rng);
  const int trackers = all ? 3 : static_cast<int>(rng() % 4);
  for (int i = 0; i < trackers; ++i) {
    p.trackers.push_back({random_pose7(rng), random_vector6(rng), random_vector6(rng), "SN-" + std::to_string(i) + "-" + std::to_string(rng() % 1000)});
  }
  return p;
}

}  // namespace

KinematicChain random_chain(std::mt19937_64& rng, int max_dof) {
  const int dof = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_dof));
  const bool branch = rng() % 3 == 0 && dof >= 2;
  std::vector<std::string> links{"base"};
  std::vector<JointSpec> joints;
  int moving = 0;
  int counter = 0;
  auto add = [&](const std::string& parent, JointKind kind) {
    JointSpec j;
    j.name = "j" + std::to_string(counter);
    j.kind = kind;
    j.parent_link = parent;
    j.child_link = "l" + std::to_string(counter);
    ++counter;
    j.origin = Pose(Eigen::Vector3d(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)),
                    random_quaternion(rng));
    Eigen::Vector3d axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    if (axis.norm() < 0.1) axis = Eigen::Vector3d::UnitZ();
    j.axis = axis.normalized();
    if (kind == JointKind::Fixed) {
      j.lower = j.upper = 0.0;
    } else if (kind == JointKind::Revolute) {
      j.lower = -3.0;
      j.upper = 3.0;
      j.velocity_limit = 2.0;
    } else {
      j.lower = -0.5;
      j.upper = 0.5;
      j.velocity_limit = 0.5;
    }
    links.push_back(j.child_link);
    joints.push_back(j);
    return joints.back().child_link;
  };
  std::string tip = "base";
  const int split = branch ? dof / 2 : -1;
  bool branched = false;
  while (moving < dof) {
    const auto roll = rng() % 10;
    const JointKind kind = roll < 6 ? JointKind::Revolute : (roll < 8 ? JointKind::Prismatic : JointKind::Fixed);
    std::string parent = tip;
    if (kind != JointKind::Fixed && moving == split && !branched) {
      parent = links[rng() % links.size()];
      branched = true;
    }
    if (kind != JointKind::Fixed) ++moving;
    tip = add(parent, kind);
  }
  add(tip, JointKind::Fixed);
  return KinematicChain("random", links, joints);
}

Configuration random_configuration(const KinematicChain& chain, std::mt19937_64& rng) {
  Configuration q(chain.dof());
  const auto lo = chain.lower_limits();
  const auto hi = chain.upper_limits();
  for (int i = 0; i < chain.dof(); ++i) q[i] = uniform(rng, lo[i], hi[i]);
  return q;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> fd_jacobian(const KinematicChain& chain, const Configuration& q,
                                                     const std::string& frame, double h) {
  Eigen::Matrix<double, 6, Eigen::Dynamic> j(6, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    Configuration qp = q;
    Configuration qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Pose fp = forward_kinematics(chain, qp, frame);
    const Pose fm = forward_kinematics(chain, qm, frame);
    j.block<3, 1>(0, i) = (fp.position - fm.position) / (2 * h);
    // Angular velocity from the matrix logarithm of R(q+h) R(q-h)^T.
    const Eigen::AngleAxisd aa(fp.rotation() * fm.rotation().transpose());
    j.block<3, 1>(3, i) = aa.axis() * aa.angle() / (2 * h);
  }
  return j;
}

TrackingPacket random_packet(std::mt19937_64& rng) { return packet(rng, false); }
TrackingPacket full_packet(std::mt19937_64& rng) { return packet(rng, true); }

HandFrame hand_frame(const Pose& wrist, const std::vector<std::pair<int, Eigen::Vector3d>>& offsets, double scale) {
  HandFrame f;
  f.is_active = true;
  f.scale = scale;
  for (auto& j : f.joints) j.pose = wrist;
  for (const auto& [idx, off] : offsets) {
    f.joints[static_cast<std::size_t>(idx)].pose = Pose(wrist.transform_point(off), wrist.orientation);
  }
  return f;
}

std::vector<SessionEntry> scripted_session(const std::function<Pose(double)>& path, double seconds,
                                           double rate_hz) {
  std::vector<SessionEntry> out;
  const auto n = static_cast<int>(std::floor(seconds * rate_hz)) + 1;
  for (int k = 0; k < n; ++k) {
    const double t = k / rate_hz;
    TrackingPacket p;
    p.sequence = static_cast<std::uint64_t>(k);
    p.timestamp_ns = std::llround(t * 1e9);
    ControllerState c;
    c.pose = to_pose7(path(t));
    c.grip = 1.0;
    p.right_controller = c;
    out.push_back({p.timestamp_ns, encode_packet(p)});
  }
  return out;
}

std::vector<TableField> tracking_table_fields() {
  std::vector<TableField> rows{{{"head", "pose"}, "head"}, {{"head", "status"}, "head"}, {{"head", "handMode"}, "head"}};
  for (const char* side : {"leftController", "rightController"}) {
    for (const char* f : {"pose", "axisX", "axisY", "axisClick", "grip", "trigger", "primaryButton", "secondaryButton",
                          "menuButton"}) {
      rows.push_back({{side, f}, "controller"});
    }
  }
  for (const char* side : {"leftHand", "rightHand"}) {
    rows.push_back({{side, "isActive"}, "hand"});
    rows.push_back({{side, "scale"}, "hand"});
    rows.push_back({{side, "HandJointLocations"}, "hand"});
    for (const char* f : {"pose", "status", "radius"}) rows.push_back({{side, "HandJointLocations", "#", f}, "handJoint"});
  }
  rows.push_back({{"body", "joints"}, "body"});
  for (const char* f : {"pose", "velocity", "acceleration"}) rows.push_back({{"body", "joints", "#", f}, "bodyJoint"});
  for (const char* f : {"p", "va", "wva", "sn"}) rows.push_back({{"motionTrackers", "#", f}, "tracker"});
  return rows;
}

TrackingPacket covering_packet() {
  std::mt19937_64 rng(77);
  TrackingPacket p = full_packet(rng);
  for (auto* hand : {&*p.left_hand, &*p.right_hand}) {
    hand->is_active = true;
    hand->joints.resize(26);
  }
  return p;
}

namespace {

std::optional<ErrorCode> decode_code(const std::string& bytes) {
  try {
    decode_packet(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> table_coverage_gaps(const nlohmann::json& schema) {
  using nlohmann::json;
  std::vector<std::string> gaps;
  const json full = json::parse(encode_packet(covering_packet()));
  for (const auto& row : tracking_table_fields()) {
    std::string name;
    for (const auto& p : row.path) name += (name.empty() ? "" : ".") + p;
    const std::string& key = row.path.back();
    const json& def = schema.at("$defs").at(row.def);
    if (!def.contains("properties") || !def["properties"].contains(key)) gaps.push_back(name + ": not declared");
    const json req = def.value("required", json::array());
    if (std::find(req.begin(), req.end(), key) == req.end()) gaps.push_back(name + ": not required");
    json doc = full;
    json* parent = &doc;
    for (std::size_t i = 0; i + 1 < row.path.size(); ++i) {
      parent = row.path[i] == "#" ? &(*parent)[0] : &(*parent)[row.path[i]];
    }
    if (!parent->contains(key)) {
      gaps.push_back(name + ": not emitted");
      continue;
    }
    parent->erase(key);
    if (decode_code(doc.dump()) != ErrorCode::SchemaViolation) gaps.push_back(name + ": removal accepted by codec");
    if (schema_errors(schema, doc).empty()) gaps.push_back(name + ": removal accepted by schema");
    (*parent)[key] = json::object({{"bogus", 1}});
    const auto c = decode_code(doc.dump());
    if (c != ErrorCode::SchemaViolation && c != ErrorCode::RangeViolation) gaps.push_back(name + ": bad type accepted by codec");
    if (schema_errors(schema, doc).empty()) gaps.push_back(name + ": bad type accepted by schema");
  }
  for (const char* key : {"timestamp", "sequence", "head", "leftController", "rightController", "leftHand", "rightHand",
                          "body", "motionTrackers"}) {
    json doc = full;
    doc.erase(key);
    if (decode_code(doc.dump()) != ErrorCode::SchemaViolation) gaps.push_back(std::string(key) + ": removal accepted by codec");
    if (schema_errors(schema, doc).empty()) gaps.push_back(std::string(key) + ": removal accepted by schema");
  }
  return gaps;
}

LoopTrace track_arm(const TeleopConfig& config, const std::vector<SessionEntry>& session,
                    const std::function<Pose(double)>& path, double path_seconds, OfflineOptions options) {
  const ArmMapping& arm = config.arms.at(0);
  const KinematicChain& chain = config.chains.at(arm.chain);
  const Pose device0 = xr_to_robot(path(0.0), config.convention);
  std::optional<Pose> anchor;
  LoopTrace out;
  options.on_tick = [&](const TickInfo& tick) {
    std::optional<Pose> target;
    for (const auto& c : tick.step->commands)
      if (const auto* a = std::get_if<ArmVelocity>(&c)) target = a->target;
    if (!target) return;
    if (!anchor) anchor = *target;
    const Pose ee = forward_kinematics(chain, tick.state->chains.at(arm.chain), arm.ee_frame);
    const double t = std::min(static_cast<double>(tick.time_ns) * 1e-9, path_seconds);
    ClutchState clutch = clutch_engage(device0, *anchor);
    const Pose ideal = *clutched_target(clutch, xr_to_robot(path(t), config.convention), arm.alignment);
    out.time_s.push_back(static_cast<double>(tick.time_ns) * 1e-9);
    out.target_position.push_back((ee.position - target->position).norm());
    out.target_angle.push_back(angular_distance(ee.orientation, target->orientation));
    out.ideal_position.push_back((ee.position - ideal.position).norm());
    out.ideal_angle.push_back(angular_distance(ee.orientation, ideal.orientation));
    out.targets.push_back(*target);
    out.ee.push_back(ee);
  };
  out.result = run_offline(config, session, options);
  return out;
}

namespace {

using nlohmann::json;

const json& resolve(const json& root, const json& node) {
  if (!node.contains("$ref")) return node;
  const std::string ref = node["$ref"].get<std::string>();
  return root.at(json::json_pointer(ref.substr(1)));
}

bool type_matches(const std::string& type, const json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  return false;
}

void check(const json& root, const json& raw, const json& v, const std::string& at, std::vector<std::string>& errors) {
  const json& s = resolve(root, raw);
  if (s.contains("type") && !type_matches(s["type"].get<std::string>(), v)) {
    errors.push_back(at + ": expected " + s["type"].get<std::string>());
    return;
  }
  if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end()) {
    errors.push_back(at + ": not in enum");
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (s.contains("minimum") && d < s["minimum"].get<double>()) errors.push_back(at + ": below minimum");
    if (s.contains("maximum") && d > s["maximum"].get<double>()) errors.push_back(at + ": above maximum");
    if (s.contains("exclusiveMinimum") && d <= s["exclusiveMinimum"].get<double>()) {
      errors.push_back(at + ": not above exclusiveMinimum");
    }
  }
  if (v.is_string()) {
    const auto& str = v.get_ref<const std::string&>();
    if (s.contains("minLength") && str.size() < s["minLength"].get<std::size_t>()) errors.push_back(at + ": too short");
    if (s.contains("pattern") && !std::regex_search(str, std::regex(s["pattern"].get<std::string>()))) {
      errors.push_back(at + ": pattern mismatch");
    }
  }
  if (v.is_object()) {
    for (const auto& key : s.value("required", json::array())) {
      if (!v.contains(key.get<std::string>())) errors.push_back(at + ": missing " + key.get<std::string>());
    }
    if (s.contains("properties")) {
      for (const auto& [key, sub] : s["properties"].items()) {
        if (v.contains(key)) check(root, sub, v[key], at + "." + key, errors);
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(at + ": too few items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errors.push_back(at + ": too many items");
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(root, s["items"], v[i], at + "[" + std::to_string(i) + "]", errors);
    }
  }
  if (s.contains("oneOf")) {
    int matches = 0;
    for (const auto& alt : s["oneOf"]) {
      std::vector<std::string> sub;
      check(root, alt, v, at, sub);
      matches += sub.empty() ? 1 : 0;
    }
    if (matches != 1) errors.push_back(at + ": oneOf matched " + std::to_string(matches) + " alternatives");
  }
}

}  // namespace

std::vector<std::string> schema_errors(const nlohmann::json& schema, const nlohmann::json& doc) {
  std::vector<std::string> errors;
  check(schema, schema, doc, "$", errors);
  return errors;
}

}  // namespace xrt::testing
