#pragma once

// Deliberately plain single-threaded substep used as an oracle for the
// optimized pipeline in solver.hpp. It shares only the constitutive law and
// the collider primitives; kernel evaluation, transfers and grid storage are
// written out independently.

#include "mpmsim/collider.hpp"
#include "mpmsim/material.hpp"
#include "mpmsim/state.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mpmsim::reference {

/// Quadratic B-spline N(r), r in cell units.
inline Real quadratic_bspline(Real r) {
  r = std::abs(r);
  if (r < 0.5) return 0.75 - r * r;
  if (r < 1.5) return 0.5 * (1.5 - r) * (1.5 - r);
  return 0;
}

inline void substep(SimState& state, std::span<const Material> materials, const SimParams& params,
                    std::span<const RigidCollider> colliders) {
  const auto& res = state.grid.resolution();
  const Real dx = state.grid.dx();
  const Real dt = params.dt;
  const std::size_t nodes = static_cast<std::size_t>(res[0]) * res[1] * res[2];
  std::vector<Real> mass(nodes, 0.0);
  std::vector<Vec3> mom(nodes, Vec3::Zero());
  auto flat = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * res[1] + j) * res[2] + k; };

  for (auto& p : state.particles) {
    const Material& m = materials[p.material_id];
    const Mat3 F_new = (Mat3::Identity() + dt * p.C) * p.F;
    Mat3 PFt;
    if (F_new.determinant() > 0)
      PFt = neo_hookean_stress(F_new, m.mu(), m.lambda()) * F_new.transpose();
    else
      PFt = kirchhoff_stress_clamped(F_new, m.mu(), m.lambda()).first;
    p.F = F_new;
    const Vec3 cell = p.x / dx;
    for (int i = static_cast<int>(std::floor(cell.x())) - 2; i <= static_cast<int>(std::floor(cell.x())) + 2; ++i)
      for (int j = static_cast<int>(std::floor(cell.y())) - 2; j <= static_cast<int>(std::floor(cell.y())) + 2; ++j)
        for (int k = static_cast<int>(std::floor(cell.z())) - 2; k <= static_cast<int>(std::floor(cell.z())) + 2; ++k) {
          if (i < 0 || j < 0 || k < 0 || i >= res[0] || j >= res[1] || k >= res[2]) continue;
          const Vec3 xi(i * dx, j * dx, k * dx);
          const Vec3 d = xi - p.x;
          const Real w = quadratic_bspline(d.x() / dx) * quadratic_bspline(d.y() / dx) * quadratic_bspline(d.z() / dx);
          if (w == 0) continue;
          const Vec3 force = -(4 / (dx * dx)) * p.rest_volume * PFt * d;
          mom[flat(i, j, k)] += w * (p.mass * p.v + p.mass * (p.C * d) + force * dt);
          mass[flat(i, j, k)] += w * p.mass;
        }
  }

  const Real theta = params.theta(dx);
  for (int i = 0; i < res[0]; ++i)
    for (int j = 0; j < res[1]; ++j)
      for (int k = 0; k < res[2]; ++k) {
        const auto n = flat(i, j, k);
        if (mass[n] <= 0) continue;
        Vec3 v = mom[n] / mass[n] + dt * params.gravity;
        const Vec3 x(i * dx, j * dx, k * dx);
        const RigidCollider* nearest = nullptr;
        Real best = std::numeric_limits<Real>::infinity();
        for (const auto& c : colliders) {
          const Real d = sample_distance(c.shape, c.rotation.transpose() * (x - c.translation));
          if (d < best || (d == best && nearest && c.id < nearest->id)) {
            best = d;
            nearest = &c;
          }
        }
        if (nearest && best < theta) {
          const Vec3 x_ref = nearest->rotation.transpose() * (x - nearest->translation);
          v = resolve_velocity(v, *nearest, sdf_normal(nearest->shape, x_ref, *nearest), x);
        }
        const int ijk[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          const bool low = ijk[a] < params.boundary_width;
          const bool high = ijk[a] >= res[a] - params.boundary_width;
          if (params.boundary == BoundaryMode::stick && (low || high)) v = Vec3::Zero();
          if (params.boundary == BoundaryMode::separate) {
            if (low && v[a] < 0) v[a] = 0;
            if (high && v[a] > 0) v[a] = 0;
          }
        }
        mom[n] = v;
      }

  for (auto& p : state.particles) {
    Vec3 v = Vec3::Zero();
    Mat3 C = Mat3::Zero();
    const Vec3 cell = p.x / dx;
    for (int i = static_cast<int>(std::floor(cell.x())) - 2; i <= static_cast<int>(std::floor(cell.x())) + 2; ++i)
      for (int j = static_cast<int>(std::floor(cell.y())) - 2; j <= static_cast<int>(std::floor(cell.y())) + 2; ++j)
        for (int k = static_cast<int>(std::floor(cell.z())) - 2; k <= static_cast<int>(std::floor(cell.z())) + 2; ++k) {
          if (i < 0 || j < 0 || k < 0 || i >= res[0] || j >= res[1] || k >= res[2]) continue;
          const Vec3 d = Vec3(i * dx, j * dx, k * dx) - p.x;
          const Real w = quadratic_bspline(d.x() / dx) * quadratic_bspline(d.y() / dx) * quadratic_bspline(d.z() / dx);
          if (w == 0) continue;
          const Vec3 vi = mass[flat(i, j, k)] > 0 ? mom[flat(i, j, k)] : Vec3::Zero();
          v += w * vi;
          C += (4 / (dx * dx)) * w * vi * d.transpose();
        }
    p.v = v;
    p.C = C;
    p.x += dt * v;
    for (int a = 0; a < 3; ++a) p.x[a] = std::min(std::max(p.x[a], 1.5 * dx), (res[a] - 2.5) * dx);
  }
  state.time += dt;
  ++state.step_count;
}

}  // namespace mpmsim::reference
