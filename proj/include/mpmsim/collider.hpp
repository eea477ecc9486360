#pragma once

#include "mpmsim/sdf.hpp"
#include "mpmsim/types.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>

namespace mpmsim {

struct AnalyticBox {
  Vec3 half_extents = Vec3::Constant(0.05);
};

struct BakedShape {
  std::shared_ptr<const SdfGrid> sdf;
  SdfLookup lookup = SdfLookup::trilinear;
};

using ColliderShape = std::variant<AnalyticBox, BakedShape>;

enum class ContactMode { coulomb, sticky };

using ColliderId = std::uint8_t;
inline constexpr ColliderId kNoCollider = 0xFF;

/// Posed rigid tool. friction is the Coulomb coefficient, unrelated to the
/// Lamé mu of the tissue.
struct RigidCollider {
  ColliderId id = 0;
  ColliderShape shape = AnalyticBox{};
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Real friction = 0.5;
  ContactMode mode = ContactMode::coulomb;
  std::string group;
};

/// Exact signed distance from p to the surface of a box centered at the origin.
inline Real box_distance(const Vec3& p, const Vec3& half_extents) {
  const Vec3 q = p.cwiseAbs() - half_extents;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

/// x_ref = R^T (x - T).
inline Vec3 world_to_ref(const Vec3& x, const RigidCollider& collider) {
  return collider.rotation.transpose() * (x - collider.translation);
}

inline Real sample_distance(const ColliderShape& shape, const Vec3& x_ref) {
  return std::visit(
      [&](const auto& s) -> Real {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AnalyticBox>)
          return box_distance(x_ref, s.half_extents);
        else
          return s.sdf->sample(x_ref, s.lookup);
      },
      shape);
}

/// World-space box enclosing the collider surface.
inline std::pair<Vec3, Vec3> world_bounds(const RigidCollider& collider) {
  Vec3 lo, hi;
  if (const auto* box = std::get_if<AnalyticBox>(&collider.shape)) {
    lo = -box->half_extents;
    hi = box->half_extents;
  } else {
    const auto& sdf = *std::get<BakedShape>(collider.shape).sdf;
    lo = sdf.bounds_min;
    hi = sdf.bounds_max;
  }
  const Vec3 center = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  const Vec3 world_center = collider.rotation * center + collider.translation;
  const Vec3 world_half = collider.rotation.cwiseAbs() * half;
  return {world_center - world_half, world_center + world_half};
}

/// Finite-difference step used for normals: one lattice cell for baked shapes.
inline Real normal_step(const ColliderShape& shape) {
  if (const auto* box = std::get_if<AnalyticBox>(&shape)) return 1e-6 * (1.0 + box->half_extents.maxCoeff());
  return std::get<BakedShape>(shape).sdf->spacing();
}

/// Unit outward normal in world frame from central differences of the
/// distance in the collider frame. At a vanishing gradient the cached normal
/// is returned when present, otherwise the direction from the collider origin.
inline Vec3 sdf_normal(const ColliderShape& shape, const Vec3& x_ref, const RigidCollider& collider,
                       const Vec3* cached = nullptr) {
  const Real h = normal_step(shape);
  Vec3 grad;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    grad[a] = (sample_distance(shape, x_ref + e) - sample_distance(shape, x_ref - e)) / (2 * h);
  }
  const Real len = grad.norm();
  if (len > 1e-9 && std::isfinite(len)) return collider.rotation * (grad / len);
  if (cached && cached->squaredNorm() > 0) return cached->normalized();
  const Vec3 radial = collider.rotation * x_ref;
  if (radial.norm() > 0) return radial.normalized();
  return Vec3::UnitY();
}

/// Rigid-body velocity of the material point of the collider located at x.
inline Vec3 collider_point_velocity(const RigidCollider& collider, const Vec3& x) {
  return collider.linear_velocity + collider.angular_velocity.cross(x - collider.translation);
}

/// Contact response for a grid velocity v at x with outward normal n.
/// Coulomb: separating or resting nodes keep v; approaching nodes lose the
/// relative normal velocity and have their tangential slip reduced by
/// friction * |v_n|, down to full stick. Sticky: every node in contact
/// takes the tool velocity.
inline Vec3 resolve_velocity(const Vec3& v, const RigidCollider& collider, const Vec3& n, const Vec3& x) {
  const Vec3 v_co = collider_point_velocity(collider, x);
  if (collider.mode == ContactMode::sticky) return v_co;
  const Vec3 v_rel = v - v_co;
  const Real v_n = v_rel.dot(n);
  if (v_n >= 0) return v;
  const Vec3 v_t = v_rel - v_n * n;
  const Real slip = v_t.norm();
  if (slip <= -collider.friction * v_n) return v_co;
  return v_t + (collider.friction * v_n / slip) * v_t + v_co;
}

}  // namespace mpmsim
