#pragma once

#include "mpmsim/grid.hpp"
#include "mpmsim/material.hpp"
#include "mpmsim/mesh.hpp"
#include "mpmsim/state.hpp"
#include "mpmsim/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace mpmsim {

class SpawnError : public Error {
 public:
  using Error::Error;
};

struct ParticleSpawn {
  std::vector<Vec3> positions;
  Real rest_volume_per_particle = 0;
  std::uint32_t material_id = 0;
  Real source_volume = 0;
};

namespace detail {

/// Counter-based uniform in [0, 1): splitmix64 of (seed, stream, lane).
inline Real hashed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t lane) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream * 0xBF58476D1CE4E5B9ull + lane * 0x94D049BB133111EBull;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<Real>(z >> 11) * 0x1.0p-53;
}

/// Strata counts per axis proportional to size with a product >= count and as
/// close to count as the search finds.
inline Index3 strata_for(const Vec3& size, std::size_t count) {
  const Real volume = size.prod();
  Real h = std::cbrt(volume / static_cast<Real>(count));
  Index3 best{0, 0, 0};
  std::size_t best_total = 0;
  for (int iter = 0; iter < 200; ++iter) {
    Index3 n{};
    for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::lround(size[a] / h)));
    const std::size_t total = static_cast<std::size_t>(n[0]) * n[1] * n[2];
    if (total >= count && (best_total == 0 || total < best_total)) {
      best = n;
      best_total = total;
    }
    h *= total >= count ? 1.01 : 0.99;
  }
  if (best_total == 0) {
    const int side = static_cast<int>(std::ceil(std::cbrt(static_cast<Real>(count))));
    best = {side, side, side};
  }
  return best;
}

/// Picks `count` of `total` slots spread evenly over the index range.
inline std::size_t spread_slot(std::size_t k, std::size_t count, std::size_t total) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(k) * total) / count);
}

}  // namespace detail

/// Stratified jittered sampling of an axis-aligned box. Reproducible for a seed.
inline ParticleSpawn sample_box(const Vec3& center, const Vec3& size, std::size_t count, std::uint64_t seed,
                                std::uint32_t material_id = 0) {
  if (count == 0) throw SpawnError("particle count must be positive");
  if (!(size.minCoeff() > 0)) throw SpawnError("box size must be positive");
  const Index3 n = detail::strata_for(size, count);
  const std::size_t total = static_cast<std::size_t>(n[0]) * n[1] * n[2];
  const Vec3 cell = size.cwiseQuotient(Vec3(n[0], n[1], n[2]));
  const Vec3 lo = center - 0.5 * size;
  ParticleSpawn spawn;
  spawn.positions.resize(count);
  spawn.material_id = material_id;
  spawn.source_volume = size.prod();
  spawn.rest_volume_per_particle = spawn.source_volume / static_cast<Real>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
    const std::size_t slot = detail::spread_slot(static_cast<std::size_t>(k), count, total);
    const int i = static_cast<int>(slot % n[0]);
    const int j = static_cast<int>((slot / n[0]) % n[1]);
    const int l = static_cast<int>(slot / (static_cast<std::size_t>(n[0]) * n[1]));
    const Vec3 jitter(detail::hashed_uniform(seed, slot, 0), detail::hashed_uniform(seed, slot, 1),
                      detail::hashed_uniform(seed, slot, 2));
    spawn.positions[k] = lo + (Vec3(i, j, l) + jitter).cwiseProduct(cell);
  }
  return spawn;
}

/// Jittered sampling of the interior of a closed mesh. Interior cells come
/// from a voxelization fine enough to hold `count` samples; jittered points in
/// cells touching the surface are re-drawn until they test inside.
inline ParticleSpawn sample_mesh_volume(const TriMesh& mesh, std::size_t count, std::uint64_t seed,
                                        std::uint32_t material_id = 0) {
  if (count == 0) throw SpawnError("particle count must be positive");
  check_watertight(mesh);
  const Real volume = std::abs(mesh_volume(mesh));
  if (!(volume > 0)) throw SpawnError("mesh encloses no volume");
  const auto [lo, hi] = mesh.bounds();

  Real h = std::cbrt(volume / static_cast<Real>(count));
  std::vector<Index3> interior;
  std::vector<std::uint8_t> near_surface;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Index3 n{};
    for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / h)));
    const std::size_t cells = static_cast<std::size_t>(n[0]) * n[1] * n[2];
    std::vector<std::uint8_t> inside(cells, 0);
    auto flat = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * n[1] + j) * n[0] + i; };
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(cells); ++s) {
      const int i = static_cast<int>(s % n[0]);
      const int j = static_cast<int>((s / n[0]) % n[1]);
      const int k = static_cast<int>(s / (static_cast<std::size_t>(n[0]) * n[1]));
      inside[s] = point_inside(mesh, lo + (Vec3(i, j, k) + Vec3::Constant(0.5)) * h) ? 1 : 0;
    }
    interior.clear();
    near_surface.clear();
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j)
        for (int i = 0; i < n[0]; ++i) {
          if (!inside[flat(i, j, k)]) continue;
          bool boundary = false;
          for (int d = 0; d < 6 && !boundary; ++d) {
            Index3 q{i, j, k};
            q[d / 2] += (d % 2) ? 1 : -1;
            if (q[d / 2] < 0 || q[d / 2] >= n[d / 2] || !inside[flat(q[0], q[1], q[2])]) boundary = true;
          }
          interior.push_back({i, j, k});
          near_surface.push_back(boundary ? 1 : 0);
        }
    if (interior.size() >= count) break;
    h *= 0.9;
  }
  if (interior.size() < count) throw SpawnError("mesh too thin to host the requested particle count");

  ParticleSpawn spawn;
  spawn.positions.resize(count);
  spawn.material_id = material_id;
  spawn.source_volume = volume;
  spawn.rest_volume_per_particle = volume / static_cast<Real>(count);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
    const std::size_t slot = detail::spread_slot(static_cast<std::size_t>(k), count, interior.size());
    const auto& c = interior[slot];
    const Vec3 corner = lo + Vec3(c[0], c[1], c[2]) * h;
    Vec3 p = corner + Vec3::Constant(0.5 * h);
    for (std::uint64_t lane = 0; lane < 64; lane += 3) {
      const Vec3 candidate = corner + h * Vec3(detail::hashed_uniform(seed, slot, lane),
                                               detail::hashed_uniform(seed, slot, lane + 1),
                                               detail::hashed_uniform(seed, slot, lane + 2));
      if (!near_surface[slot] || point_inside(mesh, candidate)) {
        p = candidate;
        break;
      }
    }
    spawn.positions[k] = p;
  }
  return spawn;
}

/// Appends spawned particles to a state; mass = density * rest volume.
inline void add_particles(SimState& state, const ParticleSpawn& spawn, const Material& material,
                          const Vec3& velocity = Vec3::Zero()) {
  state.particles.reserve(state.particles.size() + spawn.positions.size());
  for (const auto& x : spawn.positions) {
    Particle p;
    p.x = x;
    p.v = velocity;
    p.rest_volume = spawn.rest_volume_per_particle;
    p.mass = material.density() * spawn.rest_volume_per_particle;
    p.material_id = spawn.material_id;
    state.particles.push_back(p);
  }
}

}  // namespace mpmsim
