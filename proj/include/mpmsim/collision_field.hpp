#pragma once

#include "mpmsim/collider.hpp"
#include "mpmsim/grid.hpp"
#include "mpmsim/types.hpp"

#include <limits>
#include <span>
#include <vector>

namespace mpmsim {

/// Per-node merged distance to the nearest collider and that collider's id.
/// Nodes farther than 2 * theta from every collider carry kNoCollider.
struct CollisionField {
  std::vector<Real> distance;
  std::vector<ColliderId> object_id;
  std::vector<Vec3> last_normal;  // zero where no normal has been computed yet
  Real theta = 0;

  void resize(std::size_t nodes) {
    distance.assign(nodes, std::numeric_limits<Real>::infinity());
    object_id.assign(nodes, kNoCollider);
    if (last_normal.size() != nodes) last_normal.assign(nodes, Vec3::Zero());
  }

  bool in_contact(std::size_t node) const {
    return object_id[node] != kNoCollider && distance[node] < theta;
  }
};

/// Distance and nearest-collider id at one world position; ties go to the lower id.
inline std::pair<Real, ColliderId> nearest_collider(std::span<const RigidCollider> colliders,
                                                    const Vec3& x) {
  Real best = std::numeric_limits<Real>::infinity();
  ColliderId best_id = kNoCollider;
  for (const auto& c : colliders) {
    const Real d = sample_distance(c.shape, world_to_ref(x, c));
    if (d < best || (d == best && c.id < best_id)) {
      best = d;
      best_id = c.id;
    }
  }
  return {best, best_id};
}

/// Rebuilds the field over every grid node: distance is the minimum over
/// colliders, object_id its argmin where that minimum is below 2 * theta.
/// theta must be positive.
inline void update_collision_field(std::span<const RigidCollider> colliders, const Grid& grid,
                                   Real theta, CollisionField& field) {
  if (!(theta > 0)) throw ParameterError("collision threshold must be positive");
  const std::size_t count = grid.size();
  if (field.distance.size() != count) field.resize(count);
  field.theta = theta;
  const Real cap = 2 * theta;
  std::fill(field.distance.begin(), field.distance.end(), std::numeric_limits<Real>::infinity());
  std::fill(field.object_id.begin(), field.object_id.end(), kNoCollider);
  const auto& res = grid.resolution();
  for (const auto& c : colliders) {
    const auto merge = [&](std::size_t n, Real d) {
      const Real cur = field.distance[n];
      if (d < cur || (d == cur && c.id < field.object_id[n])) {
        field.distance[n] = d;
        field.object_id[n] = d < cap ? c.id : kNoCollider;
      }
    };
    if (const auto* box = std::get_if<AnalyticBox>(&c.shape)) {
      const Vec3 h = box->half_extents;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < res[0]; ++i)
        for (int j = 0; j < res[1]; ++j) {
          const std::size_t first = grid.index(i, j, 0);
          for (int k = 0; k < res[2]; ++k)
            merge(first + k, box_distance(world_to_ref(grid.node_position(i, j, k), c), h));
        }
    } else {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(count); ++n)
        merge(static_cast<std::size_t>(n),
              sample_distance(c.shape, world_to_ref(grid.node_position(static_cast<std::size_t>(n)), c)));
    }
  }
}

inline CollisionField update_collision_field(std::span<const RigidCollider> colliders, const Grid& grid,
                                             Real theta) {
  CollisionField field;
  update_collision_field(colliders, grid, theta, field);
  return field;
}

/// Collider with the given id, or nullptr.
inline const RigidCollider* find_collider(std::span<const RigidCollider> colliders, ColliderId id) {
  for (const auto& c : colliders)
    if (c.id == id) return &c;
  return nullptr;
}

}  // namespace mpmsim
