#include "mpmsim/driver.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mpmsim;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene() {
  SceneConfig s;
  s.domain.resolution = {16, 16, 16};
  s.materials = {MaterialSpec{}};
  BodySpec a, b;
  a.center = Vec3(0.3, 0.25, 0.5);
  a.size = Vec3(0.2, 0.15, 0.2);
  a.count = 300;
  b = a;
  b.center.x() = 0.7;
  b.count = 100;
  s.bodies = {a, b};
  s.duration = 0.05;
  return s;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mpmsim_driver_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Overrides, ParticleCountSplitsProportionally) {
  SceneConfig s = small_scene();
  override_particle_count(s, 2000);
  EXPECT_EQ(s.particle_count(), 2000u);
  EXPECT_EQ(s.bodies[0].count, 1500u);
  EXPECT_EQ(s.bodies[1].count, 500u);
  EXPECT_THROW(override_particle_count(s, 0), SceneError);
}

TEST(Overrides, SeedPerBody) {
  SceneConfig s = small_scene();
  override_seed(s, 10);
  EXPECT_EQ(s.bodies[0].seed, 10u);
  EXPECT_EQ(s.bodies[1].seed, 11u);
}

TEST(RunFrames, WritesMeshesMetricsAndTimings) {
  const auto dir = scratch("run");
  Simulation sim(small_scene());
  RunOptions opt;
  opt.out_dir = dir;
  opt.write_particles = true;
  std::size_t callbacks = 0;
  opt.on_frame = [&](std::size_t, const MetricSample&) { ++callbacks; };
  const RunResult r = run_frames(sim, opt);
  EXPECT_EQ(r.frames, 4u);
  EXPECT_EQ(callbacks, 4u);
  for (int f = 0; f < 4; ++f) {
    EXPECT_TRUE(fs::exists(dir / frame_filename(f)));
    EXPECT_TRUE(fs::exists(dir / frame_filename(f, "csv")));
  }
  const auto metrics = lines(dir / "metrics.csv");
  ASSERT_EQ(metrics.size(), 5u);
  EXPECT_EQ(metrics[0], kMetricsHeader);
  EXPECT_EQ(metrics[4].substr(0, 8), "0.050000");
  const auto timings = lines(dir / "timings.csv");
  ASSERT_EQ(timings.size(), 2u);
  EXPECT_EQ(timings[0], kTimingsHeader);
  EXPECT_EQ(std::count(timings[1].begin(), timings[1].end(), ','), 4);
  EXPECT_EQ(lines(dir / frame_filename(0, "csv")).size(), 401u);
  fs::remove_all(dir);
}

TEST(RunFrames, TimingCategoriesAccountForTotal) {
  SceneConfig s = small_scene();
  override_particle_count(s, 3000);
  Simulation sim(s);
  RunOptions opt;
  opt.frames = 6;
  opt.out_dir = scratch("timing");
  const RunResult r = run_frames(sim, opt);
  const auto& t = r.mean_timings;
  EXPECT_GT(t.soft_simulation, 0);
  EXPECT_GT(t.collision_detection, 0);
  EXPECT_GT(t.marching_cubes, 0);
  EXPECT_NEAR(t.category_sum(), t.total, 0.05 * t.total);
  fs::remove_all(opt.out_dir);
}

TEST(RunFrames, NumericalFailureThrows) {
  SceneConfig s = small_scene();
  Simulation sim(s);
  sim.state().particles[0].v = Vec3(std::nan(""), 0, 0);
  RunOptions opt;
  opt.frames = 1;
  EXPECT_THROW(run_frames(sim, opt), NumericalError);
}

TEST(Sweep, RecordsFailuresAndContinues) {
  const auto rows = sweep_young_modulus(small_scene(), {1e3, -1.0, 1e5}, 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[1].status, "config_error");
  EXPECT_EQ(rows[2].status, "ok");
  EXPECT_NEAR(rows[2].metrics.time, 0.025, 1e-12);
  std::ostringstream out;
  write_sweep_csv(out, rows);
  std::istringstream in(out.str());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, std::string("E,status,") + kMetricsHeader);
  EXPECT_EQ(first.substr(0, 8), "1000,ok,");
  EXPECT_EQ(second, "-1,config_error,,,,,");
}

TEST(Sweep, StifferDeformsLess) {
  // Blocks start on the floor band and sag under gravity.
  const auto rows = sweep_young_modulus(small_scene(), {1e3, 1e5}, 16);
  ASSERT_EQ(rows[0].status, "ok");
  ASSERT_EQ(rows[1].status, "ok");
  EXPECT_GT(rows[0].metrics.mean_abs_J_minus_1, rows[1].metrics.mean_abs_J_minus_1);
}

TEST(Bench, PositiveAndRestoresThreads) {
  const int before = thread_count();
  const Real ms = bench_point(small_scene(), 500, 1, 2, 1);
  EXPECT_GT(ms, 0);
  EXPECT_EQ(thread_count(), before);
}

TEST(FitLine, ExactAndNoisy) {
  const auto exact = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(exact.slope, 2, 1e-12);
  EXPECT_NEAR(exact.intercept, 1, 1e-12);
  EXPECT_NEAR(exact.r_squared, 1, 1e-12);
  // Hand-computed: x mean 2, y mean 2; sxy = 3, sxx = 2, syy = 6 -> R^2 = 9 / 12.
  const auto noisy = fit_line({1, 2, 3}, {1, 1, 4});
  EXPECT_NEAR(noisy.slope, 1.5, 1e-12);
  EXPECT_NEAR(noisy.r_squared, 0.75, 1e-12);
}
