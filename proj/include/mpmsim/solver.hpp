#pragma once

#include "mpmsim/collider.hpp"
#include "mpmsim/collision_field.hpp"
#include "mpmsim/kernel.hpp"
#include "mpmsim/material.hpp"
#include "mpmsim/parallel.hpp"
#include "mpmsim/state.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <functional>
#include <span>
#include <vector>

namespace mpmsim {

namespace detail {

using Clock = std::chrono::steady_clock;

inline Real elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<Real, std::milli>(Clock::now() - since).count();
}

/// Scatter of one particle; also advances its deformation gradient.
/// Add is a functor (node, momentum increment, mass increment).
template <typename Add>
inline bool scatter_particle(Particle& p, const Material& mat, Real dt, Real dx, Real inv_dx,
                             const Grid& grid, Add&& add) {
  const Stencil s = bspline_stencil(p.x, inv_dx);
  p.F = (Mat3::Identity() + dt * p.C) * p.F;
  const auto [tau, inverted] = kirchhoff_stress_clamped(p.F, mat.mu(), mat.lambda());
  const Mat3 affine = (-4 * inv_dx * inv_dx * dt * p.rest_volume) * tau + p.mass * p.C;
  const Vec3 mv = p.mass * p.v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        const Real w = s.weight(i, j, k);
        const Vec3 dpos = s.offset(i, j, k, dx);
        add(grid.index(s.base[0] + i, s.base[1] + j, s.base[2] + k), w * (mv + affine * dpos), w * p.mass);
      }
  return inverted;
}

inline int color_of(const Index3& block) {
  return (block[0] & 1) | ((block[1] & 1) << 1) | ((block[2] & 1) << 2);
}

}  // namespace detail

/// Particle-to-grid transfer with the fused MLS-MPM force. Grid accumulators
/// must be zero on entry. Returns the number of particles whose volume ratio
/// had to be clamped.
inline std::size_t p2g(SimState& state, std::span<const Material> materials, const SimParams& params) {
  auto& grid = state.grid;
  auto& particles = state.particles;
  const Real dx = grid.dx(), inv_dx = grid.inv_dx(), dt = params.dt;
  const auto count = static_cast<std::ptrdiff_t>(particles.size());
  std::size_t inverted = 0;

  if (params.deterministic) {
    // Particles are binned into 4^3-cell blocks by stencil base. Blocks sharing
    // a parity color are at least 4 cells apart, so their 6-node footprints
    // never overlap and can run concurrently without atomics. Within a block
    // particles are visited in index order.
    constexpr int kBlock = 4;
    const auto& res = grid.resolution();
    const Index3 nb{(res[0] + kBlock - 1) / kBlock, (res[1] + kBlock - 1) / kBlock,
                    (res[2] + kBlock - 1) / kBlock};
    const std::size_t block_count = static_cast<std::size_t>(nb[0]) * nb[1] * nb[2];
    std::vector<std::uint32_t> block_of(particles.size());
    std::vector<std::uint32_t> offsets(block_count + 1, 0);
    for (std::size_t p = 0; p < particles.size(); ++p) {
      const Stencil s = bspline_stencil(particles[p].x, inv_dx);
      const Index3 b{s.base[0] / kBlock, s.base[1] / kBlock, s.base[2] / kBlock};
      block_of[p] = static_cast<std::uint32_t>((static_cast<std::size_t>(b[0]) * nb[1] + b[1]) * nb[2] + b[2]);
      ++offsets[block_of[p] + 1];
    }
    for (std::size_t b = 0; b < block_count; ++b) offsets[b + 1] += offsets[b];
    std::vector<std::uint32_t> order(particles.size());
    {
      auto cursor = offsets;
      for (std::size_t p = 0; p < particles.size(); ++p) order[cursor[block_of[p]]++] = static_cast<std::uint32_t>(p);
    }
    std::array<std::vector<std::uint32_t>, 8> by_color;
    for (std::size_t b = 0; b < block_count; ++b) {
      if (offsets[b] == offsets[b + 1]) continue;
      const Index3 bc{static_cast<int>(b / (static_cast<std::size_t>(nb[1]) * nb[2])),
                      static_cast<int>((b / nb[2]) % nb[1]), static_cast<int>(b % nb[2])};
      by_color[detail::color_of(bc)].push_back(static_cast<std::uint32_t>(b));
    }
    for (const auto& blocks : by_color) {
      const auto nblocks = static_cast<std::ptrdiff_t>(blocks.size());
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : inverted)
      for (std::ptrdiff_t bi = 0; bi < nblocks; ++bi) {
        const auto b = blocks[bi];
        for (auto it = offsets[b]; it < offsets[b + 1]; ++it) {
          auto& p = particles[order[it]];
          inverted += detail::scatter_particle(p, materials[p.material_id], dt, dx, inv_dx, grid,
                                               [&](std::size_t n, const Vec3& dm, Real dmass) {
                                                 auto& node = grid[n];
                                                 node.momentum += dm;
                                                 node.mass += dmass;
                                               });
        }
      }
    }
    return inverted;
  }

  if (thread_count() == 1) {
    for (std::ptrdiff_t p = 0; p < count; ++p) {
      auto& part = particles[p];
      inverted += detail::scatter_particle(part, materials[part.material_id], dt, dx, inv_dx, grid,
                                           [&](std::size_t n, const Vec3& dm, Real dmass) {
                                             auto& node = grid[n];
                                             node.momentum += dm;
                                             node.mass += dmass;
                                           });
    }
    return inverted;
  }

#pragma omp parallel for schedule(static) reduction(+ : inverted)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    auto& part = particles[p];
    inverted += detail::scatter_particle(part, materials[part.material_id], dt, dx, inv_dx, grid,
                                         [&](std::size_t n, const Vec3& dm, Real dmass) {
                                           auto& node = grid[n];
                                           atomic_add(node.momentum.x(), dm.x());
                                           atomic_add(node.momentum.y(), dm.y());
                                           atomic_add(node.momentum.z(), dm.z());
                                           atomic_add(node.mass, dmass);
                                         });
  }
  return inverted;
}

/// Applies the domain boundary condition to a node velocity.
inline void apply_boundary(Vec3& v, const Index3& node, const Index3& res, int width, BoundaryMode mode) {
  for (int a = 0; a < 3; ++a) {
    const bool low = node[a] < width;
    const bool high = node[a] >= res[a] - width;
    if (!low && !high) continue;
    if (mode == BoundaryMode::stick) {
      v.setZero();
      return;
    }
    if (low) v[a] = std::max(v[a], 0.0);
    if (high) v[a] = std::min(v[a], 0.0);
  }
}

/// Momentum to velocity, gravity, tool contact, domain boundary. Zero-mass
/// nodes are left untouched.
inline void grid_update(SimState& state, const SimParams& params, CollisionField& collision,
                        std::span<const RigidCollider> colliders) {
  auto& grid = state.grid;
  std::array<const RigidCollider*, 256> by_id{};
  for (const auto& c : colliders) by_id[c.id] = &c;
  const bool has_field = collision.object_id.size() == grid.size();
  const auto count = static_cast<std::ptrdiff_t>(grid.size());
  const auto& res = grid.resolution();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < count; ++n) {
    auto& node = grid[static_cast<std::size_t>(n)];
    if (!(node.mass > 0)) continue;
    Vec3 v = node.momentum / node.mass;
    v += params.dt * params.gravity;
    const Index3 c = grid.coords(static_cast<std::size_t>(n));
    if (has_field && collision.in_contact(static_cast<std::size_t>(n))) {
      if (const RigidCollider* tool = by_id[collision.object_id[n]]) {
        const Vec3 x = grid.node_position(c[0], c[1], c[2]);
        const Vec3 x_ref = world_to_ref(x, *tool);
        const Vec3 normal = sdf_normal(tool->shape, x_ref, *tool, &collision.last_normal[n]);
        collision.last_normal[n] = normal;
        v = resolve_velocity(v, *tool, normal, x);
      }
    }
    apply_boundary(v, c, res, params.boundary_width, params.boundary);
    node.momentum = v;
  }
}

/// Grid-to-particle gather, APIC affine update and advection. Positions are
/// clamped to keep the stencil on the lattice.
inline void g2p_advect(SimState& state, const SimParams& params) {
  const auto& grid = state.grid;
  const Real dx = grid.dx(), inv_dx = grid.inv_dx(), dt = params.dt;
  const Vec3 lo = Vec3::Constant(grid.lower_margin());
  const Vec3 hi(grid.upper_margin(0), grid.upper_margin(1), grid.upper_margin(2));
  auto& particles = state.particles;
  const auto count = static_cast<std::ptrdiff_t>(particles.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    auto& part = particles[p];
    const Stencil s = bspline_stencil(part.x, inv_dx);
    Vec3 v = Vec3::Zero();
    Mat3 B = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          const Real w = s.weight(i, j, k);
          const Vec3& vi = grid.at(s.base[0] + i, s.base[1] + j, s.base[2] + k).momentum;
          v += w * vi;
          B += (w * vi) * s.offset(i, j, k, dx).transpose();
        }
    part.v = v;
    part.C = (4 * inv_dx * inv_dx) * B;
    // A non-finite position would index outside the grid on the next scatter;
    // the bad velocity is left in place for the frame-level finiteness check.
    const Vec3 next = part.x + dt * v;
    if (next.allFinite()) part.x = next.cwiseMax(lo).cwiseMin(hi);
  }
}

struct SubstepReport {
  std::size_t inverted = 0;
  Real collision_ms = 0;
  Real simulation_ms = 0;
};

/// One substep: clear grid, P2G, collision field, grid update, G2P + advection.
inline SubstepReport substep(SimState& state, std::span<const Material> materials, const SimParams& params,
                             std::span<const RigidCollider> colliders) {
  SubstepReport report;
  auto t0 = detail::Clock::now();
  state.grid.clear();
  report.inverted = p2g(state, materials, params);
  report.simulation_ms += detail::elapsed_ms(t0);

  t0 = detail::Clock::now();
  update_collision_field(colliders, state.grid, params.theta(state.grid.dx()), state.collision);
  report.collision_ms = detail::elapsed_ms(t0);

  t0 = detail::Clock::now();
  grid_update(state, params, state.collision, colliders);
  g2p_advect(state, params);
  state.time += params.dt;
  ++state.step_count;
  report.simulation_ms += detail::elapsed_ms(t0);
  return report;
}

/// Called before every substep with the current simulated time; may repose colliders.
using KinematicsUpdate = std::function<void(Real time, std::vector<RigidCollider>& colliders)>;

/// substeps_per_frame substeps with wall-clock accounting.
inline StepReport step(SimState& state, std::span<const Material> materials, const SimParams& params,
                       std::vector<RigidCollider>& colliders, const KinematicsUpdate& kinematics = {}) {
  StepReport report;
  const auto start = detail::Clock::now();
  const Real t_begin = state.time;
  for (int s = 0; s < params.substeps_per_frame; ++s) {
    if (kinematics) {
      const auto t0 = detail::Clock::now();
      kinematics(state.time, colliders);
      report.other_ms += detail::elapsed_ms(t0);
    }
    const auto sub = substep(state, materials, params, colliders);
    report.collision_detection_ms += sub.collision_ms;
    report.soft_simulation_ms += sub.simulation_ms;
    report.inverted_events += sub.inverted;
    ++report.substeps;
  }
  report.sim_time_advanced = state.time - t_begin;
  report.total_ms = detail::elapsed_ms(start);
  return report;
}

}  // namespace mpmsim
