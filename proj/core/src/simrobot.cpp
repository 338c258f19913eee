#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "xrteleop/simrobot.hpp"

namespace xrt {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

SimState SimState::initial(const TeleopConfig& config) {
  SimState s;
  for (const auto& [name, chain] : config.chains) s.chains[name] = config.home_configuration(name);
  return s;
}

SimState sim_step(const SimState& state, std::span<const RobotCommand> commands, double dt,
                  const std::map<std::string, KinematicChain>& chains) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  SimState next = state;
  auto lookup = [&](const std::string& name) -> std::pair<const KinematicChain&, Configuration&> {
    auto c = chains.find(name);
    auto q = next.chains.find(name);
    if (c == chains.end() || q == next.chains.end()) {
      throw Error(ErrorCode::InvalidArgument, "command for unknown chain '" + name + "'");
    }
    return {c->second, q->second};
  };
  for (const auto& command : commands) {
    if (const auto* arm = std::get_if<ArmVelocity>(&command)) {
      auto [chain, q] = lookup(arm->chain);
      if (arm->qdot.size() != chain.dof() || q.size() != chain.dof()) {
        throw Error(ErrorCode::DimensionMismatch, "qdot for '" + arm->chain + "' has the wrong size");
      }
      q = integrate(q, arm->qdot, dt, chain.lower_limits(), chain.upper_limits()).q;
    } else if (const auto* hand = std::get_if<HandConfig>(&command)) {
      auto [chain, q] = lookup(hand->chain);
      if (hand->q.size() != chain.dof()) {
        throw Error(ErrorCode::DimensionMismatch, "hand configuration for '" + hand->chain + "' has the wrong size");
      }
      q = hand->q.cwiseMax(chain.lower_limits()).cwiseMin(chain.upper_limits());
    } else if (const auto* base = std::get_if<BaseVelocity>(&command)) {
      const double c = std::cos(state.base_heading);
      const double s = std::sin(state.base_heading);
      next.base_x += (base->vx * c - base->vy * s) * dt;
      next.base_y += (base->vx * s + base->vy * c) * dt;
      next.base_heading = wrap_angle(state.base_heading + base->wz * dt);
    } else if (const auto* gimbal = std::get_if<GimbalAngles>(&command)) {
      next.gimbal = *gimbal;
    } else if (const auto* gripper = std::get_if<GripperCommand>(&command)) {
      (gripper->side == Side::Left ? next.gripper_left : next.gripper_right) = std::clamp(gripper->value, 0.0, 1.0);
    }
  }
  next.time_ns = state.time_ns + std::llround(dt * 1e9);
  return next;
}

std::string state_to_json(const SimState& state) {
  nlohmann::json chains = nlohmann::json::object();
  for (const auto& [name, q] : state.chains) chains[name] = std::vector<double>(q.data(), q.data() + q.size());
  const nlohmann::json doc = {
      {"t", static_cast<double>(state.time_ns) * 1e-9},
      {"chains", chains},
      {"base", {{"x", state.base_x}, {"y", state.base_y}, {"heading", state.base_heading}}},
      {"gimbal", {{"yaw", state.gimbal.yaw}, {"pitch", state.gimbal.pitch}}},
      {"grippers", {{"left", state.gripper_left}, {"right", state.gripper_right}}},
  };
  return doc.dump();
}

std::vector<double> episode_state(const SimState& state) {
  std::vector<double> out;
  for (const auto& [name, q] : state.chains) out.insert(out.end(), q.data(), q.data() + q.size());
  out.push_back(state.base_x);
  out.push_back(state.base_y);
  out.push_back(state.base_heading);
  return out;
}

std::vector<double> episode_command(const TeleopConfig& config, std::span<const RobotCommand> commands) {
  std::vector<double> out;
  for (const auto& arm : config.arms) {
    const auto dof = static_cast<std::size_t>(config.chains.at(arm.chain).dof());
    std::vector<double> qdot(dof, 0.0);
    for (const auto& c : commands) {
      if (const auto* a = std::get_if<ArmVelocity>(&c); a && a->chain == arm.chain && static_cast<std::size_t>(a->qdot.size()) == qdot.size()) {
        qdot.assign(a->qdot.data(), a->qdot.data() + a->qdot.size());
      }
    }
    out.insert(out.end(), qdot.begin(), qdot.end());
  }
  BaseVelocity base;
  for (const auto& c : commands) {
    if (const auto* b = std::get_if<BaseVelocity>(&c)) base = *b;
  }
  out.push_back(base.vx);
  out.push_back(base.vy);
  out.push_back(base.wz);
  return out;
}

}  // namespace xrt
