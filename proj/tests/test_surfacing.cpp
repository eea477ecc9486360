#include "mpmsim/sampling.hpp"
#include "mpmsim/surfacing.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace mpmsim;

namespace {

ScalarField sphere_field(int n, const Vec3& c, Real r) {
  ScalarField f({n, n, n}, 1.0 / (n - 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) f.at(i, j, k) = r - (f.position(i, j, k) - c).norm();
  return f;
}

/// Every undirected edge used by exactly two triangles in opposite directions.
bool closed_and_consistent(const SurfaceMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : m.indices)
    for (int e = 0; e < 3; ++e) ++directed[{t[e], t[(e + 1) % 3]}];
  for (const auto& [edge, count] : directed)
    if (count != 1 || directed.count({edge.second, edge.first}) != 1) return false;
  return true;
}

}  // namespace

TEST(MarchingCubes, SphereVerticesOnSurface) {
  const Vec3 c(0.5, 0.5, 0.5);
  const auto mesh = marching_cubes(sphere_field(33, c, 0.3), 0);
  ASSERT_FALSE(mesh.empty());
  for (const auto& v : mesh.vertices) EXPECT_NEAR((v - c).norm(), 0.3, 1e-3);
  EXPECT_TRUE(closed_and_consistent(mesh));
  EXPECT_EQ(mesh.indices.size(), 2 * mesh.vertices.size() - 4);
}

TEST(MarchingCubes, TrianglesAndNormalsFaceOutward) {
  const Vec3 c(0.5, 0.5, 0.5);
  const auto mesh = marching_cubes(sphere_field(25, c, 0.3), 0);
  ASSERT_EQ(mesh.normals.size(), mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    EXPECT_NEAR(mesh.normals[v].norm(), 1, 1e-9);
    EXPECT_GT(mesh.normals[v].dot((mesh.vertices[v] - c).normalized()), 0.95);
  }
  for (const auto& t : mesh.indices) {
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    const Vec3 centroid = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
    EXPECT_GT(n.dot(centroid - c), 0);
  }
}

TEST(MarchingCubes, VerticesLieOnLatticeEdges) {
  const auto field = sphere_field(17, Vec3(0.45, 0.52, 0.49), 0.27);
  const auto mesh = marching_cubes(field, 0);
  for (const auto& v : mesh.vertices) {
    const Vec3 g = v / field.dx;
    int on_lattice = 0;
    for (int a = 0; a < 3; ++a)
      if (std::abs(g[a] - std::round(g[a])) < 1e-9) ++on_lattice;
    EXPECT_GE(on_lattice, 2);
  }
}

TEST(MarchingCubes, EmptyAndFullFieldsGiveNothing) {
  ScalarField f({8, 8, 8}, 0.1);
  EXPECT_TRUE(marching_cubes(f, 0.5).empty());
  for (auto& v : f.values) v = 1;
  EXPECT_TRUE(marching_cubes(f, 0.5).empty());
}

TEST(Splat, ConservesMass) {
  Domain d;
  d.resolution = {32, 32, 32};
  SimState s(d);
  add_particles(s, sample_box(Vec3::Constant(0.5), Vec3::Constant(0.25), 2000, 3), Material(1e4, 0.3, 1000));
  const auto field = splat_density(s.particles, d.resolution, d.dx());
  Real total = 0;
  for (Real v : field.values) total += v;
  EXPECT_NEAR(total * std::pow(d.dx(), 3), 1000 * std::pow(0.25, 3), 1e-9);
  // Interior density averages to the material density.
  Real interior = 0;
  for (int i = 14; i <= 18; ++i)
    for (int j = 14; j <= 18; ++j)
      for (int k = 14; k <= 18; ++k) interior += field.at(i, j, k);
  EXPECT_NEAR(interior / 125, 1000, 30);
}

TEST(Surface, BlockSurfaceIsClosedWithUvs) {
  Domain d;
  d.resolution = {32, 32, 32};
  SimState s(d);
  add_particles(s, sample_box(Vec3::Constant(0.5), Vec3(0.4, 0.2, 0.3), 8000, 3), Material(1e4, 0.3, 1000));
  auto mesh = marching_cubes(splat_density(s.particles, d.resolution, d.dx()), 300);
  compute_uvs(mesh, d);
  ASSERT_FALSE(mesh.empty());
  EXPECT_TRUE(closed_and_consistent(mesh));
  ASSERT_EQ(mesh.uvs.size(), mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    EXPECT_DOUBLE_EQ(mesh.uvs[v][0], mesh.vertices[v].x());
    EXPECT_DOUBLE_EQ(mesh.uvs[v][1], mesh.vertices[v].z());
  }
}

TEST(Obj, WritesAllRecords) {
  SurfaceMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.normals = {Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()};
  m.uvs = {{0, 0}, {1, 0}, {0, 1}};
  m.indices = {{0, 1, 2}};
  std::ostringstream out;
  write_obj(out, m);
  const std::string text = out.str();
  EXPECT_NE(text.find("f 1/1/1 2/2/2 3/3/3"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n') >= 10, true);
  EXPECT_EQ(frame_filename(7), "frame_000007.obj");
}
