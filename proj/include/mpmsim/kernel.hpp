#pragma once

#include "mpmsim/grid.hpp"
#include "mpmsim/types.hpp"

#include <array>
#include <cmath>
#include <string>

namespace mpmsim {

/// Quadratic B-spline stencil of one particle: 3 nodes per axis starting at base.
struct Stencil {
  Index3 base{0, 0, 0};
  std::array<std::array<Real, 3>, 3> weights{};  // [axis][node]
  Vec3 frac = Vec3::Zero();                      // offset from base, in cells

  Real weight(int i, int j, int k) const noexcept {
    return weights[0][i] * weights[1][j] * weights[2][k];
  }
  /// x_i - x_p for stencil node (i, j, k), in meters.
  Vec3 offset(int i, int j, int k, Real dx) const noexcept {
    return (Vec3(i, j, k) - frac) * dx;
  }
};

/// Stencil without range checks. Callers guarantee the particle lies within the
/// grid margins.
inline Stencil bspline_stencil(const Vec3& xp, Real inv_dx) noexcept {
  Stencil s;
  for (int a = 0; a < 3; ++a) {
    const Real g = xp[a] * inv_dx;
    s.base[a] = static_cast<int>(std::floor(g - 0.5));
    const Real f = g - s.base[a];
    s.frac[a] = f;
    s.weights[a][0] = 0.5 * (1.5 - f) * (1.5 - f);
    s.weights[a][1] = 0.75 - (f - 1.0) * (f - 1.0);
    s.weights[a][2] = 0.5 * (f - 0.5) * (f - 0.5);
  }
  return s;
}

inline bool stencil_in_range(const Stencil& s, const Index3& res) noexcept {
  for (int a = 0; a < 3; ++a)
    if (s.base[a] < 0 || s.base[a] + 2 > res[a] - 1) return false;
  return true;
}

/// Checked stencil evaluation. Throws StencilRangeError when any of the 27
/// nodes would fall off the lattice.
inline Stencil bspline_weights(const Vec3& xp, const Grid& grid) {
  if (!xp.allFinite()) throw StencilRangeError("particle position is not finite");
  Stencil s = bspline_stencil(xp, grid.inv_dx());
  if (!stencil_in_range(s, grid.resolution()))
    throw StencilRangeError("particle at (" + std::to_string(xp.x()) + ", " +
                            std::to_string(xp.y()) + ", " + std::to_string(xp.z()) +
                            ") lacks stencil margin");
  return s;
}

}  // namespace mpmsim
