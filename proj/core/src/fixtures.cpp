#include "xrteleop/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "xrteleop/error.hpp"

namespace xrt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Pose7 pose(double x, double y, double z, double angle, const Eigen::Vector3d& axis) {
  return to_pose7(Pose({x, y, z}, Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()))));
}

ControllerState controller(double side) {
  ControllerState c;
  c.pose = pose(0.25 * side, 1.1, -0.35, 0.3 * side, {0, 1, 0});
  c.axis_x = 0.25 * side;
  c.axis_y = -0.5;
  c.axis_click = side > 0;
  c.grip = 0.95;
  c.trigger = 0.125;
  c.primary_button = true;
  c.secondary_button = false;
  c.menu_button = side < 0;
  return c;
}

/// Open hand: fingers fanned along the wrist's local x axis.
HandState hand(double side) {
  HandState h;
  h.is_active = true;
  h.scale = 1.0;
  for (int i = 0; i < 26; ++i) {
    const int finger = i < 2 ? -1 : (i < 6 ? 0 : 1 + (i - 6) / 5);
    const int knuckle = i < 2 ? 0 : (i < 6 ? i - 2 : (i - 6) % 5);
    const double x = 0.25 * side + 0.02 * knuckle;
    const double z = -0.35 + 0.02 * finger;
    h.joints.push_back({pose(x, 1.05, z, 0.1 * knuckle, {0, 0, 1}), 3u, 0.008 - 0.001 * (knuckle % 3)});
  }
  return h;
}

TrackingPacket base_packet(std::uint64_t seq) {
  TrackingPacket p;
  p.sequence = seq;
  p.timestamp_ns = 1'700'000'000'000'000'000LL + static_cast<std::int64_t>(seq) * 11'111'111;
  p.head.pose = pose(0.0, 1.6, 0.0, 0.2, {0, 1, 0});
  p.head.hand_mode = 1;
  return p;
}

std::string file_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::pair<std::string, TrackingPacket>> golden_packets() {
  std::vector<std::pair<std::string, TrackingPacket>> out;
  out.emplace_back("golden_001.json", TrackingPacket{});

  TrackingPacket controllers = base_packet(1);
  controllers.left_controller = controller(-1);
  controllers.right_controller = controller(1);
  out.emplace_back("golden_002_controllers.json", controllers);

  TrackingPacket hands = base_packet(2);
  hands.head.hand_mode = 2;
  hands.left_hand = hand(-1);
  hands.right_hand = hand(1);
  hands.right_hand->scale = 1.1;
  out.emplace_back("golden_003_hands.json", hands);

  TrackingPacket body = base_packet(3);
  body.head.status = 0;
  body.head.hand_mode = 0;
  body.body = BodyState{};
  for (int i = 0; i < kBodyJointCount; ++i) {
    const double y = 1.7 - 0.07 * i;
    body.body->joints.push_back({pose(0.01 * (i % 5), y, 0.0, 0.05 * i, {1, 0, 0}),
                                 {0.1 * i, 0, 0, 0, 0.01 * i, 0}, {0, -0.5, 0, 0, 0, 0.02 * i}});
  }
  body.trackers.push_back({pose(0.3, 1.2, -0.1, 0.4, {0, 0, 1}), {0.1, 0, 0, 0, 0, 0.2}, {}, "PT-ELBOW-R"});
  body.trackers.push_back({pose(-0.3, 1.2, -0.1, -0.4, {0, 0, 1}), {}, {0, 0, -0.3, 0, 0, 0}, "PT-ELBOW-L"});
  out.emplace_back("golden_004_body_trackers.json", body);
  return out;
}

std::vector<std::pair<std::string, std::string>> fuzz_seeds() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, packet] : golden_packets()) out.emplace_back("seed_" + name, encode_packet(packet));

  json hands = json::parse(encode_packet(golden_packets()[2].second));
  hands["leftHand"]["HandJointLocations"].erase(0);
  out.emplace_back("bad_25_joints.json", hands.dump());

  json ctl = json::parse(encode_packet(golden_packets()[1].second));
  ctl["rightController"]["trigger"] = 1.5;
  out.emplace_back("bad_trigger_range.json", ctl.dump());
  ctl = json::parse(encode_packet(golden_packets()[1].second));
  ctl["leftController"]["pose"] = "0,0,0,0,0,0";
  out.emplace_back("bad_pose_arity.json", ctl.dump());
  ctl.erase("head");
  out.emplace_back("bad_missing_head.json", ctl.dump());

  const std::string full = encode_packet(golden_packets()[3].second);
  out.emplace_back("bad_truncated.json", full.substr(0, full.size() / 2));
  out.emplace_back("bad_not_object.json", "[1,2,3]");
  out.emplace_back("bad_empty.json", "");
  return out;
}

json fk_corpus(const std::vector<std::pair<std::string, KinematicChain>>& chains, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Uniform [0, 1) from the top 53 bits; identical on every platform.
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  json out = json::object();
  out["description"] = "World pose [x, y, z, qx, qy, qz, qw] of every link for seeded configurations.";
  out["chains"] = json::array();
  for (const auto& [name, chain] : chains) {
    json entry{{"name", name}, {"urdf", serialize_chain(chain)}, {"cases", json::array()}};
    const auto lo = chain.lower_limits();
    const auto hi = chain.upper_limits();
    for (int k = 0; k < count; ++k) {
      Configuration q(chain.dof());
      for (int i = 0; i < chain.dof(); ++i) {
        const double a = std::isfinite(lo[i]) ? lo[i] : -3.14159;
        const double b = std::isfinite(hi[i]) ? hi[i] : 3.14159;
        q[i] = k == 0 ? std::clamp(0.0, a, b) : a + (b - a) * unit();
      }
      const auto poses = chain.link_poses(q);
      json frames = json::object();
      for (std::size_t l = 0; l < poses.size(); ++l) {
        const Pose7 w = to_pose7(poses[l]);
        frames[chain.links()[l]] = std::vector<double>(w.begin(), w.end());
      }
      entry["cases"].push_back({{"q", std::vector<double>(q.data(), q.data() + q.size())}, {"frames", frames}});
    }
    out["chains"].push_back(entry);
  }
  return out;
}

void write_fixtures(const std::string& dir, const std::string& chains_dir) {
  const fs::path root(dir);
  fs::create_directories(root / "fuzz");
  json index = json::array();
  for (const auto& [name, packet] : golden_packets()) {
    put(root / name, encode_packet(packet));
    index.push_back(name);
  }
  put(root / "golden_index.json", index.dump(2) + "\n");

  json fuzz = json::array();
  for (const auto& [name, bytes] : fuzz_seeds()) {
    put(root / "fuzz" / name, bytes);
    fuzz.push_back(name);
  }
  put(root / "fuzz" / "index.json", fuzz.dump(2) + "\n");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(chains_dir))
    if (e.path().extension() == ".urdf") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, KinematicChain>> chains;
  for (const auto& f : files) chains.emplace_back(f.stem().string(), parse_chain(file_text(f)));
  put(root / "fk_corpus.json", fk_corpus(chains, 8, 20240917).dump(1) + "\n");
}

}  // namespace xrt
