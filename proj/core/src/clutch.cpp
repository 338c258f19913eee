#include "xrteleop/ik.hpp"

namespace xrt {

ClutchState clutch_engage(const Pose& device, const Pose& ee) {
  return ClutchState{true, device, ee};
}

ClutchState clutch_engage(const ClutchState& state, const Pose& device, const Pose& ee) {
  if (state.engaged) return state;
  return clutch_engage(device, ee);
}

ClutchState clutch_release(const ClutchState& state) {
  (void)state;
  return ClutchState{};
}

std::optional<Pose> clutched_target(const ClutchState& state, const Pose& device_now,
                                    const Eigen::Quaterniond& alignment) {
  if (!state.engaged || !state.anchor_device || !state.anchor_ee) return std::nullopt;
  const Pose& anchor_device = *state.anchor_device;
  const Pose& anchor_ee = *state.anchor_ee;
  // Zero displacement must reproduce the anchor bit for bit.
  if (device_now == anchor_device) return anchor_ee;

  const Eigen::Quaterniond a = alignment.normalized();
  const Eigen::Vector3d displacement = a * (device_now.position - anchor_device.position);
  const Eigen::Quaterniond delta = a * (device_now.orientation * anchor_device.orientation.conjugate()) * a.conjugate();
  return Pose(anchor_ee.position + displacement, delta * anchor_ee.orientation);
}

}  // namespace xrt
