#include "mpmsim/sampling.hpp"

#include <gtest/gtest.h>

using namespace mpmsim;

TEST(SampleBox, CountVolumeAndBounds) {
  const Vec3 center(0.5, 0.4, 0.5), size(0.3, 0.1, 0.2);
  const auto spawn = sample_box(center, size, 5000, 11);
  ASSERT_EQ(spawn.positions.size(), 5000u);
  EXPECT_NEAR(spawn.rest_volume_per_particle * 5000, size.prod(), 1e-15);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : spawn.positions) {
    ASSERT_TRUE(((p - center).cwiseAbs().array() <= 0.5 * size.array()).all());
    mean += p;
  }
  mean /= 5000.0;
  EXPECT_LT((mean - center).cwiseAbs().maxCoeff(), 0.01);
}

TEST(SampleBox, ReproducibleForSeed) {
  const auto a = sample_box(Vec3::Constant(0.5), Vec3::Constant(0.2), 1000, 4);
  const auto b = sample_box(Vec3::Constant(0.5), Vec3::Constant(0.2), 1000, 4);
  const auto c = sample_box(Vec3::Constant(0.5), Vec3::Constant(0.2), 1000, 5);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_NE(a.positions, c.positions);
}

TEST(SampleBox, CoversEveryOctant) {
  const auto spawn = sample_box(Vec3::Zero(), Vec3::Ones(), 800, 2);
  int counts[8] = {};
  for (const auto& p : spawn.positions) ++counts[(p.x() > 0) | ((p.y() > 0) << 1) | ((p.z() > 0) << 2)];
  for (int c : counts) EXPECT_NEAR(c, 100, 15);
}

TEST(SampleBox, RejectsBadInput) {
  EXPECT_THROW(sample_box(Vec3::Zero(), Vec3::Ones(), 0, 1), SpawnError);
  EXPECT_THROW(sample_box(Vec3::Zero(), Vec3(1, 0, 1), 10, 1), SpawnError);
}

TEST(SampleMesh, InteriorOnlyAndVolume) {
  const TriMesh box = make_box_mesh(Vec3(0.5, 0.5, 0.5), Vec3(0.2, 0.3, 0.25));
  const auto spawn = sample_mesh_volume(box, 3000, 9, 1);
  ASSERT_EQ(spawn.positions.size(), 3000u);
  EXPECT_EQ(spawn.material_id, 1u);
  EXPECT_NEAR(spawn.source_volume, 0.2 * 0.3 * 0.25, 1e-12);
  for (const auto& p : spawn.positions) ASSERT_TRUE(point_inside(box, p));
  const auto again = sample_mesh_volume(box, 3000, 9, 1);
  EXPECT_EQ(spawn.positions, again.positions);
}

TEST(AddParticles, MassFromDensity) {
  Domain d;
  d.resolution = {16, 16, 16};
  SimState state(d);
  const auto spawn = sample_box(Vec3::Constant(0.5), Vec3::Constant(0.2), 100, 1);
  add_particles(state, spawn, Material(1e4, 0.3, 1200), Vec3(0, 1, 0));
  ASSERT_EQ(state.particles.size(), 100u);
  Real total = 0;
  for (const auto& p : state.particles) {
    total += p.mass;
    EXPECT_EQ(p.F, Mat3::Identity());
    EXPECT_EQ(p.v, Vec3(0, 1, 0));
  }
  EXPECT_NEAR(total, 1200 * 0.008, 1e-12);
}
