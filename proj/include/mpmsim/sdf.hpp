#pragma once

#include "mpmsim/mesh.hpp"
#include "mpmsim/types.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace mpmsim {

class SdfError : public Error {
 public:
  using Error::Error;
};

enum class SdfLookup { trilinear, nearest };

/// Signed distance samples at cell centers of a lattice spanning a cubic local
/// box. Values are stored in normalized units (box side = 1) and scaled back to
/// local-frame meters on lookup. Negative inside.
struct SdfGrid {
  Index3 resolution{0, 0, 0};
  Vec3 bounds_min = Vec3::Zero();
  Vec3 bounds_max = Vec3::Ones();
  std::vector<float> values;  // x-fastest

  Real scale() const { return bounds_max.x() - bounds_min.x(); }
  Real cell_size(int axis = 0) const { return 1.0 / resolution[axis]; }
  /// Lattice spacing in local-frame meters.
  Real spacing() const { return scale() * cell_size(0); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) * (static_cast<std::size_t>(j) +
                                                      static_cast<std::size_t>(resolution[1]) * k);
  }
  float at(int i, int j, int k) const { return values[index(i, j, k)]; }

  /// Local-frame position of cell center (i, j, k).
  Vec3 cell_center(int i, int j, int k) const {
    return bounds_min + scale() * Vec3((i + 0.5) / resolution[0], (j + 0.5) / resolution[1],
                                       (k + 0.5) / resolution[2]);
  }

  /// Distance (local-frame meters) at x_ref. Outside the lattice the value at
  /// the nearest lattice point is floored at zero and the Euclidean gap added,
  /// so far queries are always positive.
  Real sample(const Vec3& x_ref, SdfLookup mode = SdfLookup::trilinear) const {
    const Vec3 u = (x_ref - bounds_min) / scale();
    if (mode == SdfLookup::nearest) {
      std::array<int, 3> c{};
      Vec3 gap = Vec3::Zero();
      for (int a = 0; a < 3; ++a) {
        const Real g = u[a] * resolution[a];
        c[a] = std::clamp(static_cast<int>(std::floor(g)), 0, resolution[a] - 1);
        const Real lo = 0.0, hi = resolution[a];
        gap[a] = g < lo ? lo - g : (g > hi ? g - hi : 0.0);
      }
      const Real v = static_cast<Real>(at(c[0], c[1], c[2]));
      const Real outside = (gap.array() / Eigen::Array3d(resolution[0], resolution[1], resolution[2])).matrix().norm();
      return outside > 0 ? (std::max(v, 0.0) + outside) * scale() : v * scale();
    }
    std::array<int, 3> i0{};
    std::array<Real, 3> t{};
    Vec3 gap = Vec3::Zero();
    for (int a = 0; a < 3; ++a) {
      const Real g = u[a] * resolution[a] - 0.5;
      const Real gc = std::clamp(g, 0.0, static_cast<Real>(resolution[a] - 1));
      gap[a] = (g - gc) / resolution[a];
      i0[a] = std::min(static_cast<int>(std::floor(gc)), resolution[a] - 2);
      t[a] = gc - i0[a];
    }
    Real v = 0;
    for (int dk = 0; dk < 2; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const Real w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) * (dk ? t[2] : 1 - t[2]);
          if (w != 0) v += w * at(i0[0] + di, i0[1] + dj, i0[2] + dk);
        }
    const Real outside = gap.norm();
    return outside > 0 ? (std::max(v, 0.0) + outside) * scale() : v * scale();
  }
};

struct BakeStats {
  std::size_t degenerate_triangles = 0;
};

namespace detail {
inline std::atomic<std::size_t>& bake_counter() {
  static std::atomic<std::size_t> counter{0};
  return counter;
}
}  // namespace detail

/// Number of bake_sdf calls made by this process.
inline std::size_t sdf_bake_count() { return detail::bake_counter().load(); }

/// Bakes a closed triangle mesh into a resolution^3 signed distance lattice.
/// Exact distances in a one-cell band around each triangle are propagated by
/// closest-triangle fast sweeping; the sign comes from ray parity along +x.
inline SdfGrid bake_sdf(const TriMesh& mesh, int resolution, BakeStats* stats = nullptr) {
  if (resolution < 4) throw SdfError("SDF resolution must be >= 4");
  check_watertight(mesh);
  ++detail::bake_counter();

  const auto [lo, hi] = mesh.bounds();
  const Real extent = (hi - lo).maxCoeff();
  if (!(extent > 0)) throw SdfError("mesh has zero extent");
  const Real side = extent * 1.25;
  const Vec3 center = 0.5 * (lo + hi);

  SdfGrid sdf;
  const int n = resolution;
  sdf.resolution = {n, n, n};
  sdf.bounds_min = center - Vec3::Constant(0.5 * side);
  sdf.bounds_max = center + Vec3::Constant(0.5 * side);

  // Triangles in lattice units: cell (i,j,k) has its center at (i,j,k).
  std::vector<std::array<Vec3, 3>> tris;
  tris.reserve(mesh.triangles.size());
  std::size_t degenerate = 0;
  const Real area_eps = 1e-14 * extent * extent;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a, b, c] = mesh.corners(t);
    if (triangle_area(a, b, c) <= area_eps) {
      ++degenerate;
      continue;
    }
    auto to_lattice = [&](const Vec3& p) {
      return Vec3((p - sdf.bounds_min) / side * n - Vec3::Constant(0.5));
    };
    tris.push_back({to_lattice(a), to_lattice(b), to_lattice(c)});
  }
  if (stats) stats->degenerate_triangles = degenerate;
  if (tris.empty()) throw SdfError("mesh has only degenerate triangles");

  const std::size_t cells = static_cast<std::size_t>(n) * n * n;
  std::vector<float> phi(cells, static_cast<float>(3 * n));
  std::vector<std::int32_t> closest(cells, -1);
  std::vector<std::uint8_t> parity(cells, 0);
  auto idx = [n](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k);
  };
  auto dist_to = [&](int i, int j, int k, std::int32_t t) {
    const auto& tri = tris[static_cast<std::size_t>(t)];
    return (closest_point_on_triangle(Vec3(i, j, k), tri[0], tri[1], tri[2]) - Vec3(i, j, k)).norm();
  };

  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tri = tris[t];
    Vec3 tlo = tri[0].cwiseMin(tri[1]).cwiseMin(tri[2]);
    Vec3 thi = tri[0].cwiseMax(tri[1]).cwiseMax(tri[2]);
    std::array<int, 3> b0{}, b1{};
    for (int a = 0; a < 3; ++a) {
      b0[a] = std::clamp(static_cast<int>(std::floor(tlo[a])) - 1, 0, n - 1);
      b1[a] = std::clamp(static_cast<int>(std::ceil(thi[a])) + 1, 0, n - 1);
    }
    for (int k = b0[2]; k <= b1[2]; ++k)
      for (int j = b0[1]; j <= b1[1]; ++j)
        for (int i = b0[0]; i <= b1[0]; ++i) {
          const auto d = static_cast<float>(dist_to(i, j, k, static_cast<std::int32_t>(t)));
          const auto c = idx(i, j, k);
          if (d < phi[c]) {
            phi[c] = d;
            closest[c] = static_cast<std::int32_t>(t);
          }
        }

    // Ray crossings along +x through cell-center rows (j, k). Edges on the
    // boundary of the projected triangle follow a top-left rule so a shared
    // edge is counted by exactly one of its two triangles.
    Eigen::Vector2d p0(tri[0].y(), tri[0].z()), p1(tri[1].y(), tri[1].z()), p2(tri[2].y(), tri[2].z());
    Real xs[3] = {tri[0].x(), tri[1].x(), tri[2].x()};
    auto cross2 = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); };
    Real area2 = cross2(p1 - p0, p2 - p0);
    if (area2 == 0) continue;
    if (area2 < 0) {
      std::swap(p1, p2);
      std::swap(xs[1], xs[2]);
      area2 = -area2;
    }
    const Eigen::Vector2d pts[3] = {p0, p1, p2};
    auto top_left = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
      const Eigen::Vector2d e = b - a;
      return (e.y() == 0 && e.x() < 0) || e.y() > 0;
    };
    const int j0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.x(), p1.x(), p2.x()}))));
    const int j1 = std::min(n - 1, static_cast<int>(std::floor(std::max({p0.x(), p1.x(), p2.x()}))));
    const int k0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.y(), p1.y(), p2.y()}))));
    const int k1 = std::min(n - 1, static_cast<int>(std::floor(std::max({p0.y(), p1.y(), p2.y()}))));
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j) {
        const Eigen::Vector2d q(j, k);
        Real w[3];
        bool inside = true;
        for (int e = 0; e < 3 && inside; ++e) {
          const auto& a = pts[(e + 1) % 3];
          const auto& b = pts[(e + 2) % 3];
          w[e] = cross2(b - a, q - a);
          if (w[e] < 0 || (w[e] == 0 && !top_left(a, b))) inside = false;
        }
        if (!inside) continue;
        const Real x = (w[0] * xs[0] + w[1] * xs[1] + w[2] * xs[2]) / area2;
        const int i_cross = static_cast<int>(std::ceil(x));
        if (i_cross < 0)
          parity[idx(0, j, k)] ^= 1;
        else if (i_cross < n)
          parity[idx(i_cross, j, k)] ^= 1;
      }
  }

  // Closest-triangle propagation; a neighbour is only re-evaluated when it
  // points at a different triangle.
  auto relax = [&](int i, int j, int k, int ni, int nj, int nk) {
    const auto c = idx(i, j, k);
    const auto t = closest[idx(ni, nj, nk)];
    if (t < 0 || t == closest[c]) return;
    const auto d = static_cast<float>(dist_to(i, j, k, t));
    if (d < phi[c]) {
      phi[c] = d;
      closest[c] = t;
    }
  };
  for (int pass = 0; pass < 2; ++pass)
    for (int dir = 0; dir < 8; ++dir) {
      const int di = (dir & 1) ? -1 : 1, dj = (dir & 2) ? -1 : 1, dk = (dir & 4) ? -1 : 1;
      const int i_begin = di > 0 ? 1 : n - 2, j_begin = dj > 0 ? 1 : n - 2, k_begin = dk > 0 ? 1 : n - 2;
      for (int k = k_begin; k >= 0 && k < n; k += dk)
        for (int j = j_begin; j >= 0 && j < n; j += dj)
          for (int i = i_begin; i >= 0 && i < n; i += di) {
            relax(i, j, k, i - di, j, k);
            relax(i, j, k, i, j - dj, k);
            relax(i, j, k, i, j, k - dk);
          }
    }

  sdf.values.resize(cells);
  const float to_normalized = 1.0f / static_cast<float>(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      std::uint8_t inside = 0;
      for (int i = 0; i < n; ++i) {
        const auto c = idx(i, j, k);
        inside ^= parity[c];
        sdf.values[c] = (inside ? -phi[c] : phi[c]) * to_normalized;
      }
    }
  return sdf;
}

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&value);
    std::reverse(b, b + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le_stream(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw SdfError("truncated SDF file");
  return read_le<T>(buf);
}

}  // namespace detail

/// "SDF1" container: magic, 3 x u32 resolution, 6 x f32 bounds (min then max),
/// then resolution^3 f32 values, x fastest. Little-endian throughout.
inline void write_sdf(std::ostream& out, const SdfGrid& sdf) {
  out.write("SDF1", 4);
  for (int a = 0; a < 3; ++a) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sdf.resolution[a]));
  for (int a = 0; a < 3; ++a) detail::write_le<float>(out, static_cast<float>(sdf.bounds_min[a]));
  for (int a = 0; a < 3; ++a) detail::write_le<float>(out, static_cast<float>(sdf.bounds_max[a]));
  for (float v : sdf.values) detail::write_le<float>(out, v);
}

inline SdfGrid read_sdf(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SDF1", 4) != 0) throw SdfError("not an SDF1 file");
  SdfGrid sdf;
  for (int a = 0; a < 3; ++a) {
    const auto r = detail::read_le_stream<std::uint32_t>(in);
    if (r < 2 || r > 4096) throw SdfError("SDF resolution out of range");
    sdf.resolution[a] = static_cast<int>(r);
  }
  for (int a = 0; a < 3; ++a) sdf.bounds_min[a] = detail::read_le_stream<float>(in);
  for (int a = 0; a < 3; ++a) sdf.bounds_max[a] = detail::read_le_stream<float>(in);
  const Vec3 ext = sdf.bounds_max - sdf.bounds_min;
  if (!(ext.minCoeff() > 0) || (ext.maxCoeff() - ext.minCoeff()) > 1e-5 * ext.maxCoeff())
    throw SdfError("SDF bounds must be a non-empty cube");
  const std::size_t count = static_cast<std::size_t>(sdf.resolution[0]) * sdf.resolution[1] * sdf.resolution[2];
  sdf.values.resize(count);
  for (auto& v : sdf.values) v = detail::read_le_stream<float>(in);
  return sdf;
}

inline void save_sdf(const std::filesystem::path& path, const SdfGrid& sdf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SdfError("cannot write " + path.string());
  write_sdf(out, sdf);
}

inline SdfGrid load_sdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SdfError("cannot open " + path.string());
  return read_sdf(in);
}

}  // namespace mpmsim
