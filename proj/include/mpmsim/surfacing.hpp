#pragma once

#include "mpmsim/detail/mc_tables.hpp"
#include "mpmsim/grid.hpp"
#include "mpmsim/kernel.hpp"
#include "mpmsim/state.hpp"
#include "mpmsim/types.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

namespace mpmsim {

/// Node-sampled scalar on the simulation lattice layout.
struct ScalarField {
  Index3 resolution{0, 0, 0};
  Real dx = 0;
  std::vector<Real> values;

  ScalarField() = default;
  ScalarField(const Index3& res, Real spacing)
      : resolution(res), dx(spacing), values(static_cast<std::size_t>(res[0]) * res[1] * res[2], 0.0) {}

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution[1] + j) * resolution[2] + k;
  }
  Real at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Real& at(int i, int j, int k) { return values[index(i, j, k)]; }
  Vec3 position(int i, int j, int k) const { return Vec3(i, j, k) * dx; }
};

struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> indices;
  std::vector<std::array<Real, 2>> uvs;
  std::vector<Vec3> normals;

  bool empty() const { return indices.empty(); }
};

/// Mass density splatted through the quadratic B-spline stencil (kg/m^3).
/// Particles whose stencil leaves the lattice are skipped.
inline ScalarField splat_density(std::span<const Particle> particles, const Index3& resolution, Real dx) {
  ScalarField field(resolution, dx);
  const Real inv_cell_volume = 1.0 / (dx * dx * dx);
  for (const auto& p : particles) {
    const Stencil s = bspline_stencil(p.x, 1.0 / dx);
    if (!stencil_in_range(s, resolution)) continue;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          field.at(s.base[0] + i, s.base[1] + j, s.base[2] + k) += s.weight(i, j, k) * p.mass * inv_cell_volume;
  }
  return field;
}

/// Iso-surface of `field` at `iso` with shared vertices per lattice edge.
/// Triangles face away from the high-valued region; vertex normals are the
/// normalized negative field gradient. Triangles with area <= 1e-12 are dropped.
inline SurfaceMesh marching_cubes(const ScalarField& field, Real iso) {
  SurfaceMesh mesh;
  const auto& res = field.resolution;
  if (res[0] < 2 || res[1] < 2 || res[2] < 2) return mesh;
  const std::size_t nodes = field.values.size();
  std::vector<std::int32_t> edge_vertex(3 * nodes, -1);

  auto gradient = [&](int i, int j, int k) {
    Vec3 g;
    const int c[3] = {i, j, k};
    for (int a = 0; a < 3; ++a) {
      int lo[3] = {i, j, k}, hi[3] = {i, j, k};
      lo[a] = std::max(c[a] - 1, 0);
      hi[a] = std::min(c[a] + 1, res[a] - 1);
      const int span = hi[a] - lo[a];
      g[a] = span > 0 ? (field.at(hi[0], hi[1], hi[2]) - field.at(lo[0], lo[1], lo[2])) / (span * field.dx) : 0.0;
    }
    return g;
  };

  auto vertex_on_edge = [&](const std::array<int, 3>& a, int axis) -> std::uint32_t {
    const std::size_t key = 3 * field.index(a[0], a[1], a[2]) + static_cast<std::size_t>(axis);
    if (edge_vertex[key] >= 0) return static_cast<std::uint32_t>(edge_vertex[key]);
    std::array<int, 3> b = a;
    ++b[axis];
    const Real va = field.at(a[0], a[1], a[2]), vb = field.at(b[0], b[1], b[2]);
    const Real t = std::clamp((iso - va) / (vb - va), 0.0, 1.0);
    const Vec3 pa = field.position(a[0], a[1], a[2]), pb = field.position(b[0], b[1], b[2]);
    const Vec3 n = -((1 - t) * gradient(a[0], a[1], a[2]) + t * gradient(b[0], b[1], b[2]));
    mesh.vertices.push_back(pa + t * (pb - pa));
    mesh.normals.push_back(n.norm() > 0 ? Vec3(n.normalized()) : Vec3::Zero());
    edge_vertex[key] = static_cast<std::int32_t>(mesh.vertices.size() - 1);
    return static_cast<std::uint32_t>(edge_vertex[key]);
  };

  for (int i = 0; i + 1 < res[0]; ++i)
    for (int j = 0; j + 1 < res[1]; ++j)
      for (int k = 0; k + 1 < res[2]; ++k) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = detail::kCornerOffsets[c];
          if (field.at(i + o[0], j + o[1], k + o[2]) < iso) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        const auto& row = detail::kTriTable[cube];
        for (int t = 0; row[t] != -1; t += 3) {
          std::array<std::uint32_t, 3> tri{};
          for (int v = 0; v < 3; ++v) {
            const auto& ec = detail::kEdgeCorners[row[t + v]];
            const auto& o0 = detail::kCornerOffsets[ec[0]];
            const auto& o1 = detail::kCornerOffsets[ec[1]];
            std::array<int, 3> a{i + std::min(o0[0], o1[0]), j + std::min(o0[1], o1[1]), k + std::min(o0[2], o1[2])};
            int axis = 0;
            while (o0[axis] == o1[axis]) ++axis;
            tri[v] = vertex_on_edge(a, axis);
          }
          // The table winds counter-clockwise seen from the low side; reverse
          // so the front face looks out of the high-valued region.
          std::swap(tri[1], tri[2]);
          const Real area = 0.5 * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                                      .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]])
                                      .norm();
          if (area > 1e-12) mesh.indices.push_back(tri);
        }
      }

  // Drop vertices that only belonged to discarded triangles.
  std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
  SurfaceMesh compact;
  for (auto& tri : mesh.indices)
    for (auto& v : tri) {
      if (remap[v] < 0) {
        remap[v] = static_cast<std::int32_t>(compact.vertices.size());
        compact.vertices.push_back(mesh.vertices[v]);
        compact.normals.push_back(mesh.normals[v]);
      }
      v = static_cast<std::uint32_t>(remap[v]);
    }
  compact.indices = std::move(mesh.indices);
  for (std::size_t v = 0; v < compact.normals.size(); ++v)
    if (compact.normals[v].squaredNorm() == 0) compact.normals[v] = Vec3::UnitY();
  return compact;
}

/// Top-down planar UVs: u from x, v from z over the domain box, clamped to [0,1].
inline void compute_uvs(SurfaceMesh& mesh, const Domain& domain) {
  mesh.uvs.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const auto& p = mesh.vertices[v];
    mesh.uvs[v] = {std::clamp(p.x() / domain.extent.x(), 0.0, 1.0), std::clamp(p.z() / domain.extent.z(), 0.0, 1.0)};
  }
}

/// Wavefront OBJ with positions, texture coordinates, normals and faces.
inline void write_obj(std::ostream& out, const SurfaceMesh& mesh) {
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.7g %.7g %.7g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.uvs) {
    std::snprintf(buf, sizeof buf, "vt %.7g %.7g\n", t[0], t[1]);
    out << buf;
  }
  for (const auto& n : mesh.normals) {
    std::snprintf(buf, sizeof buf, "vn %.6g %.6g %.6g\n", n.x(), n.y(), n.z());
    out << buf;
  }
  const bool uv = mesh.uvs.size() == mesh.vertices.size();
  const bool nrm = mesh.normals.size() == mesh.vertices.size();
  for (const auto& f : mesh.indices) {
    out << 'f';
    for (auto i : f) {
      const auto k = i + 1;
      out << ' ' << k;
      if (uv || nrm) out << '/' << (uv ? std::to_string(k) : std::string()) << (nrm ? "/" + std::to_string(k) : "");
    }
    out << '\n';
  }
}

/// frame_000042.obj style name.
inline std::string frame_filename(std::size_t frame, const char* ext = "obj") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frame_%06zu.%s", frame, ext);
  return buf;
}

inline void write_obj(const std::filesystem::path& path, const SurfaceMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_obj(out, mesh);
}

}  // namespace mpmsim
