#include <filesystem>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "xrteleop/teleop.hpp"

namespace xrt {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

Eigen::Quaterniond quaternion(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw Error(ErrorCode::ArityError, "quaternion needs 4 numbers [x, y, z, w]");
  Eigen::Quaterniond q(v[3], v[0], v[1], v[2]);
  if (q.norm() < 1e-9) throw Error(ErrorCode::DegenerateQuaternion, "zero quaternion in config");
  return q.normalized();
}

Eigen::Vector3d vector3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::ArityError, "vector needs 3 numbers");
  return {v[0], v[1], v[2]};
}

std::pair<double, double> range(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorCode::ArityError, "range needs [min, max]");
  return {v[0], v[1]};
}

TeleopConfig parse(const json& doc, const std::string& base_dir) {
  TeleopConfig cfg;
  cfg.convention = parse_frame_convention(doc.value("frame_convention", std::string("openxr_to_robot")));

  for (const auto& [name, entry] : doc.at("chains").items()) {
    const std::string file = entry.is_string() ? entry.get<std::string>() : entry.at("file").get<std::string>();
    cfg.chains.emplace(name, load_chain(resolve(base_dir, file)));
    if (entry.is_object() && entry.contains("home")) {
      const auto q = entry["home"].get<std::vector<double>>();
      cfg.home[name] = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    }
  }
  for (const auto& a : doc.value("arms", json::array())) {
    ArmMapping m;
    m.side = parse_side(a.at("side").get<std::string>());
    m.chain = a.at("chain").get<std::string>();
    m.ee_frame = a.at("ee_frame").get<std::string>();
    m.weight = a.value("weight", 1.0);
    if (a.contains("alignment")) m.alignment = quaternion(a["alignment"]);
    cfg.arms.push_back(std::move(m));
  }
  for (const auto& t : doc.value("motion_trackers", json::array())) {
    TrackerMapping m;
    m.sn = t.at("sn").get<std::string>();
    m.chain = t.at("chain").get<std::string>();
    m.frame = t.at("frame").get<std::string>();
    m.weight = t.value("weight", 0.1);
    if (t.contains("offset")) m.offset = vector3(t["offset"]);
    cfg.trackers.push_back(std::move(m));
  }
  for (const auto& h : doc.value("hands", json::array())) {
    HandMapping m;
    m.side = parse_side(h.at("side").get<std::string>());
    m.chain = h.at("chain").get<std::string>();
    const auto& map = h.at("map");
    m.map = map.is_string() ? load_retarget_map(resolve(base_dir, map.get<std::string>())) : parse_retarget_map(map);
    m.params.alpha = h.value("alpha", 1.0);
    m.params.beta = h.value("beta", 0.0);
    m.params.max_iters = h.value("max_iters", 100);
    m.params.tol = h.value("tol", 1e-10);
    cfg.hands.push_back(std::move(m));
  }
  if (doc.contains("base")) {
    const auto& b = doc["base"];
    cfg.base.v_max = b.value("v_max", cfg.base.v_max);
    cfg.base.w_max = b.value("w_max", cfg.base.w_max);
    cfg.base.deadzone = b.value("deadzone", cfg.base.deadzone);
  }
  if (doc.contains("gimbal")) {
    const auto& g = doc["gimbal"];
    if (g.contains("yaw")) std::tie(cfg.gimbal.yaw_min, cfg.gimbal.yaw_max) = range(g["yaw"]);
    if (g.contains("pitch")) std::tie(cfg.gimbal.pitch_min, cfg.gimbal.pitch_max) = range(g["pitch"]);
  }
  for (const auto& g : doc.value("grippers", json::array())) {
    GripperMapping m;
    m.side = parse_side(g.at("side").get<std::string>());
    if (g.contains("curve")) {
      m.curve.knots.clear();
      for (const auto& k : g["curve"]) {
        const auto [x, y] = range(k);
        m.curve.knots.emplace_back(x, y);
      }
    }
    cfg.grippers.push_back(std::move(m));
  }
  if (doc.contains("grip")) {
    cfg.grip_engage = doc["grip"].value("engage", cfg.grip_engage);
    cfg.grip_release = doc["grip"].value("release", cfg.grip_release);
  }
  if (doc.contains("ik")) {
    const auto& k = doc["ik"];
    cfg.ik.damping = k.value("damping", cfg.ik.damping);
    cfg.ik.manipulability_weight = k.value("manipulability_weight", cfg.ik.manipulability_weight);
    cfg.ik.dt = k.value("dt", cfg.ik.dt);
    if (k.contains("max_task_speed")) cfg.ik.max_task_speed = k["max_task_speed"].get<double>();
    cfg.limit_horizon = k.value("limit_horizon", cfg.limit_horizon);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

TeleopConfig parse_teleop_config(std::string_view text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("teleop config: ") + e.what());
  }
  try {
    return parse(doc, base_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("teleop config: ") + e.what());
  }
}

TeleopConfig load_teleop_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_teleop_config(text, fs::path(path).parent_path().string());
}

}  // namespace xrt
