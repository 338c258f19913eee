#include <fstream>

#include "xrteleop/error.hpp"
#include "xrteleop/retargeting.hpp"

namespace xrt {
namespace {

int keypoint_from_json(const nlohmann::json& v, const char* what) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    if (auto idx = hand_joint_index(v.get<std::string>())) return *idx;
    throw Error(ErrorCode::InvalidArgument, std::string("unknown hand joint '") + v.get<std::string>() + "'");
  }
  throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be an index or a joint name");
}

}  // namespace

RetargetMap parse_retarget_map(const nlohmann::json& doc) {
  RetargetMap map;
  try {
    if (doc.contains("alignment")) {
      const auto& a = doc.at("alignment");
      if (!a.is_array() || a.size() != 4) throw Error(ErrorCode::InvalidArgument, "alignment needs [x, y, z, w]");
      map.alignment = Eigen::Quaterniond(a[3].get<double>(), a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
      if (map.alignment.norm() < 1e-6) throw Error(ErrorCode::InvalidArgument, "degenerate alignment quaternion");
      map.alignment.normalize();
    }
    for (const auto& p : doc.at("pairs")) {
      KeypointPair pair;
      pair.human_keypoint = keypoint_from_json(p.at("human"), "human");
      pair.robot_frame = p.at("robot").get<std::string>();
      if (p.contains("reference")) pair.reference_keypoint = keypoint_from_json(p.at("reference"), "reference");
      if (p.contains("robot_reference")) pair.robot_reference_frame = p.at("robot_reference").get<std::string>();
      map.pairs.push_back(std::move(pair));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("retarget map: ") + e.what());
  }
  return map;
}

RetargetMap load_retarget_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open retarget map '" + path + "'");
  try {
    return parse_retarget_map(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
}

nlohmann::json to_json(const RetargetMap& map) {
  nlohmann::json doc;
  doc["alignment"] = {map.alignment.x(), map.alignment.y(), map.alignment.z(), map.alignment.w()};
  doc["pairs"] = nlohmann::json::array();
  for (const KeypointPair& p : map.pairs) {
    nlohmann::json entry;
    entry["human"] = std::string(hand_joint_name(p.human_keypoint));
    entry["robot"] = p.robot_frame;
    entry["reference"] = std::string(hand_joint_name(p.reference_keypoint));
    if (!p.robot_reference_frame.empty()) entry["robot_reference"] = p.robot_reference_frame;
    doc["pairs"].push_back(std::move(entry));
  }
  return doc;
}

}  // namespace xrt
