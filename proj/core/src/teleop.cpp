#include "xrteleop/teleop.hpp"

#include <algorithm>
#include <cmath>

namespace xrt {
namespace {

const ControllerState* controller(const TrackingPacket& p, Side side) {
  const auto& c = side == Side::Left ? p.left_controller : p.right_controller;
  return c ? &*c : nullptr;
}

const HandState* hand(const TrackingPacket& p, Side side) {
  const auto& h = side == Side::Left ? p.left_hand : p.right_hand;
  return h ? &*h : nullptr;
}

void check_axis(double v, const char* name) {
  if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
    throw Error(ErrorCode::RangeViolation, std::string(name) + " outside [-1, 1]");
  }
}

const KinematicChain& chain_of(const TeleopConfig& config, const std::string& name) {
  auto it = config.chains.find(name);
  if (it == config.chains.end()) throw Error(ErrorCode::UnknownFrame, "unknown chain '" + name + "'");
  return it->second;
}

const Configuration& measured(const TeleopState& state, const TeleopConfig& config, const std::string& chain) {
  auto it = state.q.find(chain);
  if (it == state.q.end()) throw Error(ErrorCode::DimensionMismatch, "no measured configuration for '" + chain + "'");
  if (it->second.size() != chain_of(config, chain).dof()) {
    throw Error(ErrorCode::DimensionMismatch, "measured configuration for '" + chain + "' has the wrong size");
  }
  return it->second;
}

template <typename F>
void guarded(std::vector<CommandFailure>& failures, const std::string& source, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    failures.push_back({source, e.code(), e.what()});
  }
}

}  // namespace

Side parse_side(std::string_view name) {
  if (name == "left") return Side::Left;
  if (name == "right") return Side::Right;
  throw Error(ErrorCode::InvalidArgument, "side must be 'left' or 'right', got '" + std::string(name) + "'");
}

std::string_view to_string(Side side) noexcept { return side == Side::Left ? "left" : "right"; }

double GripperCurve::operator()(double trigger) const {
  if (knots.empty()) return std::clamp(trigger, 0.0, 1.0);
  const double t = std::isfinite(trigger) ? trigger : 0.0;
  double value = knots.front().second;
  if (t >= knots.back().first) {
    value = knots.back().second;
  } else if (t > knots.front().first) {
    for (std::size_t i = 1; i < knots.size(); ++i) {
      const auto& [x0, y0] = knots[i - 1];
      const auto& [x1, y1] = knots[i];
      if (t <= x1) {
        value = x1 > x0 ? y0 + (y1 - y0) * (t - x0) / (x1 - x0) : y1;
        break;
      }
    }
  }
  return std::clamp(value, 0.0, 1.0);
}

void TeleopConfig::validate() const {
  auto frame_in = [&](const std::string& chain, const std::string& frame) {
    const auto& c = chain_of(*this, chain);
    if (!c.has_link(frame)) throw Error(ErrorCode::UnknownFrame, "chain '" + chain + "' has no frame '" + frame + "'");
  };
  for (const auto& arm : arms) {
    frame_in(arm.chain, arm.ee_frame);
    if (!(arm.weight > 0.0)) throw Error(ErrorCode::InvalidArgument, "arm weight must be positive");
  }
  for (const auto& t : trackers) {
    frame_in(t.chain, t.frame);
    if (!(t.weight > 0.0)) throw Error(ErrorCode::InvalidArgument, "tracker weight must be positive");
  }
  for (const auto& h : hands) h.map.validate(chain_of(*this, h.chain));
  if (!(base.v_max > 0.0) || !(base.w_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "base limits must be positive");
  if (base.deadzone < 0.0 || base.deadzone >= 1.0) throw Error(ErrorCode::InvalidArgument, "deadzone must be in [0, 1)");
  if (!(gimbal.yaw_min < gimbal.yaw_max) || !(gimbal.pitch_min < gimbal.pitch_max)) {
    throw Error(ErrorCode::InvalidArgument, "gimbal ranges must be non-empty");
  }
  for (const auto& g : grippers) {
    for (std::size_t i = 1; i < g.curve.knots.size(); ++i) {
      if (g.curve.knots[i].first < g.curve.knots[i - 1].first) {
        throw Error(ErrorCode::InvalidArgument, "gripper curve knots must be sorted");
      }
    }
  }
  for (const auto& [name, q] : home) {
    const auto& c = chain_of(*this, name);
    if (q.size() != c.dof()) throw Error(ErrorCode::DimensionMismatch, "home for '" + name + "' has the wrong size");
    if ((q.array() < c.lower_limits().array()).any() || (q.array() > c.upper_limits().array()).any()) {
      throw Error(ErrorCode::InvalidArgument, "home for '" + name + "' violates joint limits");
    }
  }
  if (!(grip_release < grip_engage)) throw Error(ErrorCode::InvalidArgument, "grip release must be below engage");
  if (!(ik.dt > 0.0) || !(limit_horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt and horizon must be positive");
}

Configuration TeleopConfig::home_configuration(const std::string& chain) const {
  if (auto it = home.find(chain); it != home.end()) return it->second;
  return chain_of(*this, chain).neutral_configuration();
}

TeleopState TeleopState::initial(const TeleopConfig& config) {
  TeleopState s;
  for (const auto& [name, chain] : config.chains) s.q[name] = config.home_configuration(name);
  for (const auto& arm : config.arms) s.arms[arm.chain] = {};
  return s;
}

BaseVelocity map_joystick_to_base(double axis_lx, double axis_ly, double axis_rx, const BaseLimits& limits) {
  check_axis(axis_lx, "axisLX");
  check_axis(axis_ly, "axisLY");
  check_axis(axis_rx, "axisRX");
  if (std::hypot(axis_lx, axis_ly) < limits.deadzone) axis_lx = axis_ly = 0.0;
  if (std::abs(axis_rx) < limits.deadzone) axis_rx = 0.0;
  BaseVelocity v;
  v.vx = std::clamp(axis_ly * limits.v_max, -limits.v_max, limits.v_max);
  v.vy = std::clamp(-axis_lx * limits.v_max, -limits.v_max, limits.v_max);
  v.wz = std::clamp(-axis_rx * limits.w_max, -limits.w_max, limits.w_max);
  // Avoid emitting -0.0.
  v.vx += 0.0;
  v.vy += 0.0;
  v.wz += 0.0;
  return v;
}

GimbalAngles map_head_to_gimbal(const Pose& head_xr, const GimbalLimits& limits, int status,
                                FrameConvention convention) {
  if (status == 0) throw Error(ErrorCode::UnreliableTracking, "head tracking unreliable");
  const Eigen::Matrix3d r = xr_to_robot(head_xr, convention).rotation();
  GimbalAngles g;
  g.yaw = std::atan2(r(1, 0), r(0, 0));
  g.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  g.yaw = std::clamp(g.yaw, limits.yaw_min, limits.yaw_max) + 0.0;
  g.pitch = std::clamp(g.pitch, limits.pitch_min, limits.pitch_max) + 0.0;
  return g;
}

HandFrame hand_frame_from_state(const HandState& hand) {
  HandFrame frame;
  frame.is_active = hand.is_active;
  frame.scale = hand.scale;
  if (hand.joints.empty()) {
    if (hand.is_active) throw Error(ErrorCode::InvalidArgument, "active hand without joints");
    return frame;
  }
  if (hand.joints.size() != static_cast<std::size_t>(kHandJointCount)) {
    throw Error(ErrorCode::ArityError, "hand needs " + std::to_string(kHandJointCount) + " joints");
  }
  for (int i = 0; i < kHandJointCount; ++i) {
    const auto& j = hand.joints[static_cast<std::size_t>(i)];
    frame.joints[static_cast<std::size_t>(i)] = {to_pose(j.pose), j.status, j.radius};
  }
  return frame;
}

StepResult step(const TrackingPacket& packet, const TeleopState& state, const TeleopConfig& config) {
  StepResult out;
  out.state = state;
  TeleopState& next = out.state;

  // Arms: grip clutch, then differential IK toward the clutched target.
  for (const auto& arm : config.arms) {
    ArmState& as = next.arms[arm.chain];
    const ControllerState* c = controller(packet, arm.side);
    if (c == nullptr) {
      as.clutch = clutch_release(as.clutch);
      as.grip_pressed = false;
      continue;
    }
    const bool was = as.grip_pressed;
    if (!was && c->grip >= config.grip_engage) as.grip_pressed = true;
    if (was && c->grip <= config.grip_release) as.grip_pressed = false;

    guarded(out.failures, arm.chain, [&] {
      const KinematicChain& chain = chain_of(config, arm.chain);
      const Configuration& q = measured(state, config, arm.chain);
      const Pose device = xr_to_robot(to_pose(c->pose), config.convention);
      if (as.grip_pressed && !as.clutch.engaged) {
        as.clutch = clutch_engage(device, forward_kinematics(chain, q, arm.ee_frame));
      } else if (!as.grip_pressed && as.clutch.engaged) {
        as.clutch = clutch_release(as.clutch);
      }
      const auto target = clutched_target(as.clutch, device, arm.alignment);
      if (!target) return;

      std::vector<Task> tasks{Task::pose(arm.ee_frame, *target, arm.weight)};
      for (const auto& tm : config.trackers) {
        if (tm.chain != arm.chain) continue;
        for (const auto& tracker : packet.trackers) {
          if (tracker.sn != tm.sn) continue;
          const Pose p = xr_to_robot(to_pose(tracker.p), config.convention);
          tasks.push_back(Task::position(tm.frame, p.position + tm.offset, tm.weight));
        }
      }
      const auto constraints = ConstraintSet::from_chain(chain, config.limit_horizon);
      const IkSolution sol = solve_dik(chain, q, tasks, constraints, config.ik);
      out.commands.emplace_back(ArmVelocity{arm.chain, sol.qdot, *target, sol.status});
    });
  }

  // Hands.
  if (packet.head.hand_mode == 2) {
    for (const auto& hm : config.hands) {
      const HandState* h = hand(packet, hm.side);
      if (h == nullptr || !h->is_active) continue;
      guarded(out.failures, hm.chain, [&] {
        const KinematicChain& chain = chain_of(config, hm.chain);
        RetargetState rs = RetargetState::from_chain(chain);
        if (auto it = next.hand_q.find(hm.chain); it != next.hand_q.end()) {
          rs.q_prev = it->second;
        } else if (auto m = state.q.find(hm.chain); m != state.q.end() && m->second.size() == chain.dof()) {
          rs.q_prev = m->second;
        }
        const RetargetResult r = solve_retarget(chain, hand_frame_from_state(*h), hm.map, rs, hm.params);
        next.hand_q[hm.chain] = r.q;
        out.commands.emplace_back(HandConfig{hm.chain, r.q});
      });
    }
  }

  // Base: left stick translates, right stick X turns. A missing controller
  // reads as centred sticks.
  guarded(out.failures, "base", [&] {
    const ControllerState* l = controller(packet, Side::Left);
    const ControllerState* r = controller(packet, Side::Right);
    out.commands.emplace_back(map_joystick_to_base(l ? l->axis_x : 0.0, l ? l->axis_y : 0.0, r ? r->axis_x : 0.0,
                                                   config.base));
  });

  // Gimbal: hold the last command through unreliable head tracking.
  try {
    const GimbalAngles g = map_head_to_gimbal(to_pose(packet.head.pose), config.gimbal, packet.head.status,
                                              config.convention);
    next.last_gimbal = g;
    out.commands.emplace_back(g);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnreliableTracking) out.failures.push_back({"gimbal", e.code(), e.what()});
    if (next.last_gimbal) out.commands.emplace_back(*next.last_gimbal);
  }

  for (const auto& gm : config.grippers) {
    if (const ControllerState* c = controller(packet, gm.side)) {
      out.commands.emplace_back(GripperCommand{gm.side, gm.curve(c->trigger)});
    }
  }
  return out;
}

}  // namespace xrt
