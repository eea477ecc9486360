#pragma once

#include "mpmsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mpmsim {

enum class JawState { open, closed };

struct ColliderPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  JawState jaw = JawState::open;
};

/// Poses for every collider of a scene, in scene collider order.
struct Keyframe {
  Real time = 0;
  std::vector<ColliderPose> poses;
};

struct ColliderKinematics {
  Vec3 translation = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  JawState jaw = JawState::open;
};

/// World-frame angular velocity that carries q0 to q1 in `duration` seconds
/// along the shorter arc.
inline Vec3 angular_velocity_between(const Quat& q0, const Quat& q1, Real duration) {
  Quat rel = q1 * q0.conjugate();
  if (rel.w() < 0) rel.coeffs() *= -1;
  const Real s = rel.vec().norm();
  if (s < 1e-15) return Vec3::Zero();
  const Real angle = 2 * std::atan2(s, rel.w());
  return rel.vec() / s * (angle / duration);
}

/// Interpolated collider state at time t: positions linear, orientations slerp,
/// velocities constant over each segment, jaw state held from the segment
/// start. Outside the keyframe range the nearest endpoint is returned at rest.
inline std::vector<ColliderKinematics> pose_at(const std::vector<Keyframe>& trajectory, Real t) {
  std::vector<ColliderKinematics> out;
  if (trajectory.empty()) return out;
  auto at_rest = [&](const Keyframe& key) {
    for (const auto& p : key.poses) out.push_back({p.position, p.orientation.normalized(), Vec3::Zero(), Vec3::Zero(), p.jaw});
    return out;
  };
  if (trajectory.size() == 1 || t < trajectory.front().time) return at_rest(trajectory.front());
  if (t > trajectory.back().time) return at_rest(trajectory.back());

  auto next = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                               [](Real value, const Keyframe& k) { return value < k.time; });
  const bool at_end = next == trajectory.end();  // t == last keyframe time
  if (at_end) --next;
  const Keyframe& k1 = *next;
  const Keyframe& k0 = *(next - 1);
  const Real span = k1.time - k0.time;
  const Real s = std::clamp((t - k0.time) / span, 0.0, 1.0);
  out.reserve(k0.poses.size());
  for (std::size_t c = 0; c < k0.poses.size(); ++c) {
    const auto& a = k0.poses[c];
    const auto& b = k1.poses[c];
    const Quat qa = a.orientation.normalized(), qb = b.orientation.normalized();
    ColliderKinematics kin;
    kin.translation = a.position + s * (b.position - a.position);
    kin.orientation = qa.slerp(s, qb).normalized();
    kin.linear_velocity = (b.position - a.position) / span;
    kin.angular_velocity = angular_velocity_between(qa, qb, span);
    kin.jaw = at_end ? b.jaw : a.jaw;
    out.push_back(kin);
  }
  return out;
}

}  // namespace mpmsim
