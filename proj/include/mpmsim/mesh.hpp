#pragma once

#include "mpmsim/types.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace mpmsim {

class MeshError : public Error {
 public:
  using Error::Error;
};

/// Indexed triangle soup. Counter-clockwise winding seen from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  std::array<Vec3, 3> corners(std::size_t t) const {
    const auto& tri = triangles[t];
    return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
  }

  std::pair<Vec3, Vec3> bounds() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<Real>::infinity());
    Vec3 hi = -lo;
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return {lo, hi};
  }

  void transform(Real scale, const Vec3& translate) {
    for (auto& v : vertices) v = v * scale + translate;
  }
};

inline Real triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

/// Closed axis-aligned box, 12 outward-facing triangles.
inline TriMesh make_box_mesh(const Vec3& center, const Vec3& size) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int c = 0; c < 8; ++c)
    m.vertices.push_back(center + Vec3((c & 1) ? h.x() : -h.x(), (c & 2) ? h.y() : -h.y(),
                                       (c & 4) ? h.z() : -h.z()));
  // Each quad listed counter-clockwise seen from outside.
  const std::array<std::array<std::uint32_t, 4>, 6> quads = {{
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  }};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

/// Throws MeshError unless every edge is shared by exactly two triangles that
/// traverse it in opposite directions. Triangles with repeated indices are ignored.
inline void check_watertight(const TriMesh& mesh) {
  if (mesh.triangles.empty()) throw MeshError("mesh has no triangles");
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    for (int e = 0; e < 3; ++e) {
      const auto a = t[e], b = t[(e + 1) % 3];
      if (a >= mesh.vertices.size() || b >= mesh.vertices.size())
        throw MeshError("triangle references vertex " + std::to_string(std::max(a, b)) +
                        " out of range");
      if (++directed[{a, b}] > 1)
        throw MeshError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") is traversed twice in the same direction: non-manifold or "
                        "inconsistently oriented");
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.contains({edge.second, edge.first}))
      throw MeshError("boundary edge (" + std::to_string(edge.first) + ", " +
                      std::to_string(edge.second) + "): mesh is not closed");
  }
}

/// Enclosed volume by signed tetrahedra against the origin.
inline Real mesh_volume(const TriMesh& mesh) {
  Real v = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a, b, c] = mesh.corners(t);
    v += a.dot(b.cross(c));
  }
  return v / 6.0;
}

/// Generalized winding number; ~1 inside a closed outward-oriented mesh, ~0 outside.
inline Real winding_number(const TriMesh& mesh, const Vec3& p) {
  Real total = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto [a0, b0, c0] = mesh.corners(t);
    const Vec3 a = a0 - p, b = b0 - p, c = c0 - p;
    const Real la = a.norm(), lb = b.norm(), lc = c.norm();
    const Real num = a.dot(b.cross(c));
    const Real den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2 * std::atan2(num, den);
  }
  return total / (4 * std::numbers::pi);
}

inline bool point_inside(const TriMesh& mesh, const Vec3& p) {
  return winding_number(mesh, p) > 0.5;
}

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const Real d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const Real d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const Real vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const Real d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const Real vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const Real va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const Real denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace detail {

inline int parse_obj_index(const std::string& token, std::size_t vertex_count) {
  const auto slash = token.find('/');
  const long idx = std::stol(token.substr(0, slash));
  if (idx < 0) return static_cast<int>(static_cast<long>(vertex_count) + idx);
  return static_cast<int>(idx - 1);
}

template <typename T>
T read_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  return value;
}

}  // namespace detail

/// Wavefront OBJ: `v` and `f` records; polygons are fan-triangulated.
inline TriMesh load_obj(std::istream& in) {
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Real x, y, z;
      if (!(ls >> x >> y >> z)) throw MeshError("OBJ line " + std::to_string(line_no) + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        const int idx = detail::parse_obj_index(tok, mesh.vertices.size());
        if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size())
          throw MeshError("OBJ line " + std::to_string(line_no) + ": face index out of range");
        poly.push_back(idx);
      }
      if (poly.size() < 3) throw MeshError("OBJ line " + std::to_string(line_no) + ": face has < 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        mesh.triangles.push_back({static_cast<std::uint32_t>(poly[0]),
                                  static_cast<std::uint32_t>(poly[k]),
                                  static_cast<std::uint32_t>(poly[k + 1])});
    }
  }
  return mesh;
}

/// Binary STL. Coincident vertices are welded so topology checks work.
inline TriMesh load_stl_binary(std::istream& in) {
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 84) throw MeshError("STL file too short");
  const auto count = detail::read_le<std::uint32_t>(bytes.data() + 80);
  if (bytes.size() < 84 + static_cast<std::size_t>(count) * 50)
    throw MeshError("STL triangle count exceeds file size");
  TriMesh mesh;
  std::map<std::array<float, 3>, std::uint32_t> weld;
  for (std::uint32_t t = 0; t < count; ++t) {
    const unsigned char* rec = bytes.data() + 84 + static_cast<std::size_t>(t) * 50;
    std::array<std::uint32_t, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      std::array<float, 3> p{};
      for (int a = 0; a < 3; ++a) p[a] = detail::read_le<float>(rec + 12 + v * 12 + a * 4);
      auto [it, inserted] = weld.try_emplace(p, static_cast<std::uint32_t>(mesh.vertices.size()));
      if (inserted) mesh.vertices.emplace_back(p[0], p[1], p[2]);
      tri[v] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

inline TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open mesh file " + path.string());
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_obj(in);
  if (ext == ".stl") return load_stl_binary(in);
  throw MeshError("unsupported mesh format '" + ext + "' (expected .obj or .stl)");
}

}  // namespace mpmsim
