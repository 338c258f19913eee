#include "xrteleop/protocol.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "xrteleop/error.hpp"

namespace xrt {
namespace {

using nlohmann::json;

constexpr int kMaxNesting = 16;
/// Bound on |q|^2 - 1 below which a quaternion counts as already unit.
constexpr double kUnitSlack = 1e-12;

// ---------------------------------------------------------------- encoding

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvariantViolation, std::string(what) + " is not finite");
}

void check_pose(const Pose7& p, const char* what) {
  for (double v : p) check_finite(v, what);
  // In-memory packets hold unit quaternions; decode renormalizes anything looser.
  const double n2 = p[3] * p[3] + p[4] * p[4] + p[5] * p[5] + p[6] * p[6];
  if (std::abs(n2 - 1.0) > kUnitSlack) {
    throw Error(ErrorCode::InvariantViolation, std::string(what) + " quaternion is not unit");
  }
}

void check_range(double v, double lo, double hi, const char* what) {
  check_finite(v, what);
  if (v < lo || v > hi) throw Error(ErrorCode::InvariantViolation, std::string(what) + " out of range");
}

void check_controller(const ControllerState& c) {
  check_pose(c.pose, "controller pose");
  check_range(c.axis_x, -1.0, 1.0, "axisX");
  check_range(c.axis_y, -1.0, 1.0, "axisY");
  check_range(c.grip, 0.0, 1.0, "grip");
  check_range(c.trigger, 0.0, 1.0, "trigger");
}

void check_hand(const HandState& h) {
  if (!(h.scale > 0.0) || !std::isfinite(h.scale)) throw Error(ErrorCode::InvariantViolation, "hand scale must be > 0");
  if (h.is_active && h.joints.size() != 26) {
    throw Error(ErrorCode::InvariantViolation, "active hand needs 26 joints");
  }
  if (!h.joints.empty() && h.joints.size() != 26) {
    throw Error(ErrorCode::InvariantViolation, "hand joint array must hold 0 or 26 entries");
  }
  for (const auto& j : h.joints) {
    check_pose(j.pose, "hand joint pose");
    check_finite(j.radius, "hand joint radius");
    if (j.radius < 0.0) throw Error(ErrorCode::InvariantViolation, "hand joint radius < 0");
  }
}

json vector6_json(const Vector6& v) { return json::array({v[0], v[1], v[2], v[3], v[4], v[5]}); }

json controller_json(const ControllerState& c) {
  return json{{"pose", format_pose7(c.pose)},
              {"axisX", c.axis_x},
              {"axisY", c.axis_y},
              {"axisClick", c.axis_click},
              {"grip", c.grip},
              {"trigger", c.trigger},
              {"primaryButton", c.primary_button},
              {"secondaryButton", c.secondary_button},
              {"menuButton", c.menu_button}};
}

json hand_json(const HandState& h) {
  json joints = json::array();
  for (const auto& j : h.joints) {
    joints.push_back(json{{"pose", format_pose7(j.pose)}, {"status", j.status}, {"radius", j.radius}});
  }
  return json{{"isActive", h.is_active ? 1 : 0}, {"scale", h.scale}, {"HandJointLocations", std::move(joints)}};
}

json body_json(const BodyState& b) {
  json joints = json::array();
  for (const auto& j : b.joints) {
    joints.push_back(json{{"pose", format_pose7(j.pose)},
                          {"velocity", vector6_json(j.velocity)},
                          {"acceleration", vector6_json(j.acceleration)}});
  }
  return json{{"joints", std::move(joints)}};
}

json tracker_json(const MotionTrackerState& t) {
  return json{{"p", format_pose7(t.p)}, {"va", vector6_json(t.va)}, {"wva", vector6_json(t.wva)}, {"sn", t.sn}};
}

template <typename T, typename F>
json optional_json(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : json(nullptr);
}

// ---------------------------------------------------------------- decoding

[[noreturn]] void schema(const std::string& msg) { throw Error(ErrorCode::SchemaViolation, msg); }
[[noreturn]] void range(const std::string& msg) { throw Error(ErrorCode::RangeViolation, msg); }

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema(where + ": missing key '" + key + "'");
  return *it;
}

const json& object_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_object()) schema(where + "." + key + " must be an object");
  return v;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) schema(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) range(where + "." + key + " is not finite");
  return d;
}

double number_in(const json& obj, const char* key, double lo, double hi, const std::string& where) {
  const double d = number(obj, key, where);
  if (d < lo || d > hi) range(where + "." + key + " out of range");
  return d;
}

std::int64_t integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) range(where + "." + key + " too large");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) schema(where + "." + key + " must be an integer");
  return v.get<std::int64_t>();
}

std::int64_t integer_in(const json& obj, const char* key, std::int64_t lo, std::int64_t hi, const std::string& where) {
  const std::int64_t i = integer(obj, key, where);
  if (i < lo || i > hi) range(where + "." + key + " out of range");
  return i;
}

bool flag(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i == 0 || i == 1) return i == 1;
    range(where + "." + key + " must be 0 or 1");
  }
  schema(where + "." + key + " must be a boolean");
}

Pose7 pose7(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  Pose7 out{};
  if (v.is_string()) {
    const std::string& text = v.get_ref<const std::string&>();
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find(',', start);
      if (end == std::string::npos) end = text.size();
      if (count == 7) schema(where + "." + key + " needs 7 comma-separated numbers");
      const char* first = text.data() + start;
      const char* last = text.data() + end;
      double d = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, d);
      if (ec == std::errc::result_out_of_range) range(where + "." + key + " value out of range");
      if (first == last || ec != std::errc() || ptr != last) schema(where + "." + key + " has a non-numeric field");
      if (!std::isfinite(d)) range(where + "." + key + " is not finite");
      out[count++] = d;
      start = end + 1;
    }
    if (count != 7) schema(where + "." + key + " needs 7 comma-separated numbers");
  } else if (v.is_array()) {
    if (v.size() != 7) schema(where + "." + key + " needs 7 numbers");
    for (std::size_t i = 0; i < 7; ++i) {
      if (!v[i].is_number()) schema(where + "." + key + " needs 7 numbers");
      out[i] = v[i].get<double>();
      if (!std::isfinite(out[i])) range(where + "." + key + " is not finite");
    }
  } else {
    schema(where + "." + key + " must be a pose string or array");
  }

  const double n2 = out[3] * out[3] + out[4] * out[4] + out[5] * out[5] + out[6] * out[6];
  const double norm = std::sqrt(n2);
  if (std::abs(norm - 1.0) > kWireQuaternionTolerance) range(where + "." + key + " quaternion is not unit");
  // Renormalize only when visibly off, so decode(encode(p)) == p for unit input.
  if (std::abs(n2 - 1.0) > kUnitSlack) {
    for (std::size_t i = 3; i < 7; ++i) out[i] /= norm;
  }
  return out;
}

Vector6 vector6(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array() || v.size() != 6) schema(where + "." + key + " needs 6 numbers");
  Vector6 out{};
  for (std::size_t i = 0; i < 6; ++i) {
    if (!v[i].is_number()) schema(where + "." + key + " needs 6 numbers");
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) range(where + "." + key + " is not finite");
  }
  return out;
}

ControllerState decode_controller(const json& c, const std::string& where) {
  ControllerState out;
  out.pose = pose7(c, "pose", where);
  out.axis_x = number_in(c, "axisX", -1.0, 1.0, where);
  out.axis_y = number_in(c, "axisY", -1.0, 1.0, where);
  out.axis_click = flag(c, "axisClick", where);
  out.grip = number_in(c, "grip", 0.0, 1.0, where);
  out.trigger = number_in(c, "trigger", 0.0, 1.0, where);
  out.primary_button = flag(c, "primaryButton", where);
  out.secondary_button = flag(c, "secondaryButton", where);
  out.menu_button = flag(c, "menuButton", where);
  return out;
}

HandState decode_hand(const json& h, const std::string& where) {
  HandState out;
  out.is_active = flag(h, "isActive", where);
  out.scale = number(h, "scale", where);
  if (!(out.scale > 0.0)) range(where + ".scale must be > 0");
  const json& joints = field(h, "HandJointLocations", where);
  if (!joints.is_array()) schema(where + ".HandJointLocations must be an array");
  if (joints.size() != 26 && !(joints.empty() && !out.is_active)) {
    schema(where + ".HandJointLocations needs 26 entries, got " + std::to_string(joints.size()));
  }
  out.joints.reserve(joints.size());
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string at = where + ".HandJointLocations[" + std::to_string(i) + "]";
    const json& j = joints[i];
    if (!j.is_object()) schema(at + " must be an object");
    HandJointEntry e;
    e.pose = pose7(j, "pose", at);
    e.status = static_cast<std::uint32_t>(integer_in(j, "status", 0, UINT32_MAX, at));
    e.radius = number(j, "radius", at);
    if (e.radius < 0.0) range(at + ".radius < 0");
    out.joints.push_back(e);
  }
  return out;
}

BodyState decode_body(const json& b, const std::string& where) {
  const json& joints = field(b, "joints", where);
  if (!joints.is_array()) schema(where + ".joints must be an array");
  if (joints.size() != kBodyJointCount) {
    schema(where + ".joints needs 24 entries, got " + std::to_string(joints.size()));
  }
  BodyState out;
  out.joints.reserve(joints.size());
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string at = where + ".joints[" + std::to_string(i) + "]";
    const json& j = joints[i];
    if (!j.is_object()) schema(at + " must be an object");
    BodyJointEntry e;
    e.pose = pose7(j, "pose", at);
    e.velocity = vector6(j, "velocity", at);
    e.acceleration = vector6(j, "acceleration", at);
    out.joints.push_back(e);
  }
  return out;
}

MotionTrackerState decode_tracker(const json& t, const std::string& where) {
  if (!t.is_object()) schema(where + " must be an object");
  MotionTrackerState out;
  out.p = pose7(t, "p", where);
  out.va = vector6(t, "va", where);
  out.wva = vector6(t, "wva", where);
  const json& sn = field(t, "sn", where);
  if (!sn.is_string()) schema(where + ".sn must be a string");
  out.sn = sn.get<std::string>();
  if (out.sn.empty()) schema(where + ".sn must not be empty");
  return out;
}

template <typename T, typename F>
std::optional<T> nullable(const json& obj, const char* key, F&& decode) {
  const json& v = field(obj, key, "packet");
  if (v.is_null()) return std::nullopt;
  if (!v.is_object()) schema(std::string("packet.") + key + " must be an object or null");
  return decode(v, std::string("packet.") + key);
}

/// Rejects inputs nested deeper than any valid packet before handing them
/// to the recursive-descent parser.
bool nesting_within(std::string_view bytes, int limit) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : bytes) {
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[' || c == '{') {
      if (++depth > limit) return false;
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return true;
}

}  // namespace

void validate_packet(const TrackingPacket& p) {
  if (p.timestamp_ns < 0) throw Error(ErrorCode::InvariantViolation, "timestamp must be >= 0");
  check_pose(p.head.pose, "head pose");
  if (p.head.status < 0 || p.head.status > 1) throw Error(ErrorCode::InvariantViolation, "head status out of range");
  if (p.head.hand_mode < 0 || p.head.hand_mode > 2) {
    throw Error(ErrorCode::InvariantViolation, "head handMode out of range");
  }
  if (p.left_controller) check_controller(*p.left_controller);
  if (p.right_controller) check_controller(*p.right_controller);
  if (p.left_hand) check_hand(*p.left_hand);
  if (p.right_hand) check_hand(*p.right_hand);
  if (p.body) {
    if (p.body->joints.size() != kBodyJointCount) throw Error(ErrorCode::InvariantViolation, "body needs 24 joints");
    for (const auto& j : p.body->joints) {
      check_pose(j.pose, "body joint pose");
      for (double v : j.velocity) check_finite(v, "body joint velocity");
      for (double v : j.acceleration) check_finite(v, "body joint acceleration");
    }
  }
  std::set<std::string> serials;
  for (const auto& t : p.trackers) {
    if (t.sn.empty()) throw Error(ErrorCode::InvariantViolation, "motion tracker without serial number");
    if (!serials.insert(t.sn).second) {
      throw Error(ErrorCode::InvariantViolation, "duplicate motion tracker serial '" + t.sn + "'");
    }
    check_pose(t.p, "motion tracker pose");
    for (double v : t.va) check_finite(v, "motion tracker velocity");
    for (double v : t.wva) check_finite(v, "motion tracker acceleration");
  }
}

std::string encode_packet(const TrackingPacket& p) {
  validate_packet(p);
  json trackers = json::array();
  for (const auto& t : p.trackers) trackers.push_back(tracker_json(t));
  const json doc{
      {"timestamp", p.timestamp_ns},
      {"sequence", p.sequence},
      {"head", {{"pose", format_pose7(p.head.pose)}, {"status", p.head.status}, {"handMode", p.head.hand_mode}}},
      {"leftController", optional_json(p.left_controller, controller_json)},
      {"rightController", optional_json(p.right_controller, controller_json)},
      {"leftHand", optional_json(p.left_hand, hand_json)},
      {"rightHand", optional_json(p.right_hand, hand_json)},
      {"body", optional_json(p.body, body_json)},
      {"motionTrackers", std::move(trackers)},
  };
  return doc.dump();
}

TrackingPacket decode_packet(std::string_view bytes, std::optional<std::uint64_t> last_sequence) {
  if (!nesting_within(bytes, kMaxNesting)) throw Error(ErrorCode::MalformedJson, "nesting too deep");
  const json doc = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::MalformedJson, "input is not valid JSON");
  if (!doc.is_object()) schema("packet must be a JSON object");

  TrackingPacket p;
  p.timestamp_ns = integer(doc, "timestamp", "packet");
  if (p.timestamp_ns < 0) range("packet.timestamp must be >= 0");
  const json& seq = field(doc, "sequence", "packet");
  if (!seq.is_number_unsigned()) {
    if (seq.is_number_integer()) range("packet.sequence must be >= 0");
    schema("packet.sequence must be an unsigned integer");
  }
  p.sequence = seq.get<std::uint64_t>();

  const json& head = object_field(doc, "head", "packet");
  p.head.pose = pose7(head, "pose", "packet.head");
  p.head.status = static_cast<int>(integer_in(head, "status", 0, 1, "packet.head"));
  p.head.hand_mode = static_cast<int>(integer_in(head, "handMode", 0, 2, "packet.head"));

  p.left_controller = nullable<ControllerState>(doc, "leftController", decode_controller);
  p.right_controller = nullable<ControllerState>(doc, "rightController", decode_controller);
  p.left_hand = nullable<HandState>(doc, "leftHand", decode_hand);
  p.right_hand = nullable<HandState>(doc, "rightHand", decode_hand);
  p.body = nullable<BodyState>(doc, "body", decode_body);

  const json& trackers = field(doc, "motionTrackers", "packet");
  if (!trackers.is_array()) schema("packet.motionTrackers must be an array");
  std::set<std::string> serials;
  for (std::size_t i = 0; i < trackers.size(); ++i) {
    MotionTrackerState t = decode_tracker(trackers[i], "packet.motionTrackers[" + std::to_string(i) + "]");
    if (!serials.insert(t.sn).second) schema("duplicate motion tracker serial '" + t.sn + "'");
    p.trackers.push_back(std::move(t));
  }

  if (last_sequence && p.sequence <= *last_sequence) {
    throw Error(ErrorCode::StaleSequence, "sequence " + std::to_string(p.sequence) +
                                              " does not advance past " + std::to_string(*last_sequence));
  }
  return p;
}

}  // namespace xrt
