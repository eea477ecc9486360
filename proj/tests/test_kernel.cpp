#include "mpmsim/kernel.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace mpmsim;

namespace {
Grid unit_grid(int res) {
  Domain d;
  d.resolution = {res, res, res};
  return Grid(d);
}
}  // namespace

TEST(BSpline, NodeCenteredParticle) {
  const Grid g = unit_grid(16);
  const Real dx = g.dx();
  const Stencil s = bspline_weights(Vec3(5, 6, 7) * dx, g);
  EXPECT_EQ(s.base[0], 4);
  EXPECT_EQ(s.base[1], 5);
  EXPECT_EQ(s.base[2], 6);
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(s.weights[a][0], 0.125, 1e-12);
    EXPECT_NEAR(s.weights[a][1], 0.75, 1e-12);
    EXPECT_NEAR(s.weights[a][2], 0.125, 1e-12);
  }
}

TEST(BSpline, PartitionOfUnityAndFirstMoment) {
  const Grid g = unit_grid(32);
  const Real dx = g.dx();
  for (int n = 0; n < 2000; ++n) {
    const Vec3 xp = testutil::random_vec(g.lower_margin(), g.upper_margin(0));
    const Stencil s = bspline_weights(xp, g);
    Real sum = 0;
    Vec3 moment = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          const Real w = s.weight(i, j, k);
          EXPECT_GE(w, 0);
          sum += w;
          moment += w * s.offset(i, j, k, dx);
          // offset is x_i - x_p with x_i the node position.
          const Vec3 node = g.node_position(s.base[0] + i, s.base[1] + j, s.base[2] + k);
          EXPECT_LT((s.offset(i, j, k, dx) - (node - xp)).cwiseAbs().maxCoeff(), 1e-12);
        }
    EXPECT_NEAR(sum, 1, 1e-12);
    EXPECT_LT(moment.cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BSpline, ContinuousAcrossCellBoundaries) {
  const Grid g = unit_grid(16);
  const Real dx = g.dx();
  // A particle just below and just above x = 5.5 dx (where the base index jumps)
  // must give the same weight to every shared node.
  const Vec3 a(5.5 * dx - 1e-10, 6 * dx, 6 * dx), b(5.5 * dx + 1e-10, 6 * dx, 6 * dx);
  const Stencil sa = bspline_weights(a, g), sb = bspline_weights(b, g);
  ASSERT_EQ(sb.base[0], sa.base[0] + 1);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(sa.weights[0][i + 1], sb.weights[0][i], 1e-8);
  EXPECT_NEAR(sa.weights[0][0], 0, 1e-8);
  EXPECT_NEAR(sb.weights[0][2], 0, 1e-8);
}

TEST(BSpline, RejectsParticlesWithoutMargin) {
  const Grid g = unit_grid(16);
  const Real dx = g.dx();
  EXPECT_THROW(bspline_weights(Vec3(0.2 * dx, 0.5, 0.5), g), StencilRangeError);
  EXPECT_THROW(bspline_weights(Vec3(0.5, 0.5, 15.2 * dx), g), StencilRangeError);
  EXPECT_THROW(bspline_weights(Vec3(-0.1, 0.5, 0.5), g), StencilRangeError);
  EXPECT_THROW(bspline_weights(Vec3(std::nan(""), 0.5, 0.5), g), StencilRangeError);
  EXPECT_NO_THROW(bspline_weights(Vec3(g.lower_margin(), g.lower_margin(), g.upper_margin(2)), g));
}

TEST(Domain, Validation) {
  Domain d;
  d.resolution = {2, 16, 16};
  EXPECT_THROW(d.validate(), ParameterError);
  d.resolution = {16, 16, 32};
  EXPECT_THROW(d.validate(), ParameterError);
  d.extent = Vec3(1, 1, 2);
  EXPECT_NO_THROW(d.validate());
}
