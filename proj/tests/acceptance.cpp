// Property and trend checks for the simulator, one PASS/FAIL line per check.
// Exit status is the number of failed checks.

#include "mpmsim/collision_field.hpp"
#include "mpmsim/driver.hpp"
#include "mpmsim/scenarios.hpp"

#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace mpmsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

/// Runs one check; a check that exceeds its time budget fails.
void check(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    out.ok = false;
    out.detail += "; over time budget of " + std::to_string(budget_s) + " s";
  }
  std::printf("%s %s (%s; %.2f s)\n", out.ok ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
  std::fflush(stdout);
  if (!out.ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome conservation() {
  const std::vector<Material> mats{Material(1e4, 0.3, 1000)};
  Domain d;
  d.resolution = {16, 16, 16};
  Real worst_mass = 0, worst_mom = 0;
  for (int n = 0; n < 100; ++n) {
    SimState s(d);
    add_particles(s, sample_box(testutil::random_vec(0.4, 0.6), testutil::random_vec(0.1, 0.4), 200, n + 1), mats[0]);
    Real mass = 0, scale = 0;
    Vec3 mom = Vec3::Zero();
    for (auto& p : s.particles) {
      p.v = testutil::random_vec(-1, 1);
      p.C = testutil::random_matrix(-2, 2);
      p.F = testutil::random_deformation(0.8, 1.2);
      mass += p.mass;
      mom += p.mass * p.v;
      scale += p.mass * p.v.norm();
    }
    SimParams params;
    params.deterministic = n % 2 == 0;
    p2g(s, mats, params);
    Real gm = 0;
    Vec3 gp = Vec3::Zero();
    for (const auto& node : s.grid.nodes()) {
      gm += node.mass;
      gp += node.momentum;
    }
    worst_mass = std::max(worst_mass, std::abs(gm - mass) / mass);
    worst_mom = std::max(worst_mom, (gp - mom).norm() / scale);
  }
  return {worst_mass <= 1e-9 && worst_mom <= 1e-9,
          "100 states, max rel mass err " + fmt("%.2e", worst_mass) + ", momentum " + fmt("%.2e", worst_mom)};
}

Outcome constitutive() {
  const auto l = lame_from_young_poisson(1e4, 0.3);
  Real rest = neo_hookean_stress(Mat3::Identity(), l.mu, l.lambda).cwiseAbs().maxCoeff() / l.mu;
  Real rot = 0;
  for (int n = 0; n < 100; ++n)
    rot = std::max(rot, neo_hookean_stress(testutil::random_rotation(), l.mu, l.lambda).cwiseAbs().maxCoeff() / l.mu);
  Real grad = 0;
  for (int n = 0; n < 100; ++n) {
    const Mat3 F = testutil::random_deformation(0.5, 2.0);
    const Mat3 P = neo_hookean_stress(F, l.mu, l.lambda);
    Mat3 fd;
    const Real h = 1e-6;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Mat3 Fp = F, Fm = F;
        Fp(i, j) += h;
        Fm(i, j) -= h;
        fd(i, j) = (energy_density(Fp, l.mu, l.lambda) - energy_density(Fm, l.mu, l.lambda)) / (2 * h);
      }
    grad = std::max(grad, (fd - P).norm() / P.norm());
  }
  return {rest <= 1e-12 && rot <= 1e-12 && grad <= 1e-5,
          "|P(I)|/mu " + fmt("%.1e", rest) + ", max |P(R)|/mu " + fmt("%.1e", rot) + ", max FD rel err " +
              fmt("%.1e", grad)};
}

constexpr const char* kOracleScene = R"({
  "name": "oracle_small",
  "domain": { "extent": [1.0, 1.0, 1.0], "resolution": 16 },
  "params": { "dt": 0.0005, "substeps_per_frame": 25, "gravity": [0.0, -9.8, 0.0], "boundary_width": 3 },
  "materials": [ { "young_modulus": 10000.0, "poisson_ratio": 0.3, "density": 1000.0 } ],
  "bodies": [ { "shape": "box", "center": [0.5, 0.35, 0.5], "size": [0.3, 0.2, 0.3], "count": 512, "seed": 3 } ],
  "colliders": [ { "id": 0, "shape": "box", "half_extents": [0.08, 0.05, 0.08], "friction": 0.4, "group": "tool" } ],
  "trajectory": [
    { "time": 0.0, "poses": [ { "collider": 0, "position": [0.5, 0.52, 0.5] } ] },
    { "time": 0.025, "poses": [ { "collider": 0, "position": [0.52, 0.47, 0.5],
                                  "orientation": [0.0, 0.0, 0.0998334, 0.9950042] } ] }
  ],
  "duration": 0.025
})";

Outcome oracle() {
  const SceneConfig scene = scene_from_json(nlohmann::json::parse(kOracleScene));
  const int previous = thread_count();
  set_thread_count(4);
  const Real dev = oracle_deviation(scene, 50);
  set_thread_count(previous);
  return {dev <= 1e-12, "512 particles, 16^3 grid, 50 substeps, 4 threads, max deviation " + fmt("%.2e", dev) + " m"};
}

Outcome collision() {
  Real penetration = 0, clamp = 0, rotation = 0;
  std::size_t approaching = 0;
  bool separating_kept = true, sticky_exact = true;
  for (int n = 0; n < 20000; ++n) {
    RigidCollider c;
    c.shape = AnalyticBox{Vec3::Ones()};
    c.friction = testutil::uniform(0, 1.5);
    c.mode = n % 10 == 0 ? ContactMode::sticky : ContactMode::coulomb;
    c.linear_velocity = testutil::random_vec(-1, 1);
    c.angular_velocity = testutil::random_vec(-1, 1);
    c.translation = testutil::random_vec(-1, 1);
    const Vec3 x = testutil::random_vec(-2, 2);
    const Vec3 normal = testutil::random_vec(-1, 1).normalized();
    const Vec3 v = testutil::random_vec(-2, 2);
    const Vec3 out = resolve_velocity(v, c, normal, x);
    const Vec3 v_co = collider_point_velocity(c, x);
    const Vec3 rel_in = v - v_co, rel_out = out - v_co;
    const Real vn = rel_in.dot(normal);
    if (c.mode == ContactMode::sticky) {
      sticky_exact = sticky_exact && out == v_co;
    } else if (vn < 0) {
      ++approaching;
      penetration = std::max(penetration, std::abs(rel_out.dot(normal)));
      const Real slip_in = (rel_in - vn * normal).norm();
      const Real slip_out = (rel_out - rel_out.dot(normal) * normal).norm();
      clamp = std::max(clamp, std::abs(slip_out - std::max<Real>(0, slip_in + c.friction * vn)));
    } else {
      separating_kept = separating_kept && out == v;
    }
    const Mat3 R = testutil::random_rotation();
    RigidCollider cr = c;
    cr.linear_velocity = R * c.linear_velocity;
    cr.angular_velocity = R * c.angular_velocity;
    cr.translation = R * c.translation;
    rotation = std::max(rotation, (resolve_velocity(R * v, cr, R * normal, R * x) - R * out).norm());
  }

  Domain d;
  d.resolution = {24, 24, 24};
  const Grid g(d);
  std::size_t mismatches = 0;
  for (int scene = 0; scene < 20; ++scene) {
    std::vector<RigidCollider> tools;
    const int count = 1 + scene % 4;
    for (int k = 0; k < count; ++k) {
      RigidCollider c;
      c.id = static_cast<ColliderId>(std::uniform_int_distribution<int>(0, 30)(testutil::rng()));
      while (std::any_of(tools.begin(), tools.end(), [&](const auto& t) { return t.id == c.id; })) ++c.id;
      c.shape = AnalyticBox{testutil::random_vec(0.03, 0.15)};
      c.translation = testutil::random_vec(0.15, 0.85);
      c.rotation = testutil::random_rotation();
      tools.push_back(c);
    }
    const Real theta = 0.5 * g.dx();
    const CollisionField field = update_collision_field(tools, g, theta);
    for (std::size_t n = 0; n < g.size(); ++n) {
      // Brute force: every collider at every node, ties to the lower id.
      Real best = std::numeric_limits<Real>::infinity();
      ColliderId best_id = kNoCollider;
      for (const auto& t : tools) {
        const Real dist = sample_distance(t.shape, world_to_ref(g.node_position(n), t));
        if (dist < best || (dist == best && t.id < best_id)) {
          best = dist;
          best_id = t.id;
        }
      }
      if (field.distance[n] != best || field.object_id[n] != (best < 2 * theta ? best_id : kNoCollider)) ++mismatches;
    }
  }
  const bool ok = penetration <= 1e-12 && clamp <= 1e-12 && rotation <= 1e-9 && separating_kept && sticky_exact &&
                  mismatches == 0;
  return {ok, std::to_string(approaching) + " approaching contacts, normal residual " + fmt("%.1e", penetration) +
                  ", friction clamp err " + fmt("%.1e", clamp) + ", rotated-frame err " + fmt("%.1e", rotation) +
                  ", separating kept " + (separating_kept ? "yes" : "no") + ", sticky exact " +
                  (sticky_exact ? "yes" : "no") + ", merged field mismatches " + std::to_string(mismatches) +
                  " over 20 scenes"};
}

Outcome sdf_fidelity() {
  const TriMesh cube = make_box_mesh(Vec3::Constant(0.5), Vec3::Ones());
  const SdfGrid sdf = bake_sdf(cube, 256);
  const Real cell = sdf.spacing();
  Real worst = 0;
  for (int n = 0; n < 10000; ++n) {
    const Vec3 p = testutil::random_vec(-0.05, 1.05);
    worst = std::max(worst, std::abs(sdf.sample(p) - box_distance(p - Vec3::Constant(0.5), Vec3::Constant(0.5))));
  }
  return {worst <= 2 * cell, "256^3, 10^4 points, max error " + fmt("%.3f", worst / cell) + " cells"};
}

struct StabilityRun {
  Outcome outcome;
  RunResult result;
  std::string timings_header;
};

StabilityRun stability(const fs::path& out_dir) {
  StabilityRun run;
  const SceneConfig scene = builtin_scenario("retraction");
  Simulation sim(scene);
  RunOptions opt;
  opt.out_dir = out_dir;
  run.result = run_frames(sim, opt);
  std::ifstream timings(out_dir / "timings.csv");
  std::getline(timings, run.timings_header);

  bool finite = state_is_finite(sim.state());
  std::size_t outside = 0;
  for (const auto& p : sim.state().particles)
    for (int a = 0; a < 3; ++a)
      if (!(p.x[a] >= 0 && p.x[a] <= scene.domain.extent[a])) ++outside;
  std::ostringstream detail;
  detail << sim.state().particles.size() << " particles, " << scene.domain.resolution[0] << "^3 grid, dt "
         << scene.params.dt << ", " << scene.params.substeps_per_frame << " substeps/frame, " << run.result.frames
         << " frames, finite " << (finite ? "yes" : "no") << ", out of domain " << outside << ", "
         << fmt("%.0f", run.result.mean_timings.total) << " ms/frame";
  run.outcome = {finite && outside == 0 && run.result.frames == 120 && sim.state().particles.size() == 24000,
                 detail.str()};
  return run;
}

Outcome timing_report(const StabilityRun& run) {
  const auto& t = run.result.mean_timings;
  const Real gap = std::abs(t.category_sum() - t.total) / t.total;
  const bool taxonomy = run.timings_header == kTimingsHeader;
  return {taxonomy && gap <= 0.05, "header '" + run.timings_header + "', categories " + fmt("%.1f", t.category_sum()) +
                                       " ms vs total " + fmt("%.1f", t.total) + " ms, gap " +
                                       fmt("%.2f", 100 * gap) + "%"};
}

Outcome stiffness() {
  const auto rows = sweep_young_modulus(builtin_scenario("retraction"), retraction_sweep_moduli(), std::nullopt);
  bool ok = true;
  std::string detail = "mean|J-1|:";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " E=" + fmt("%.0e", rows[i].value) + " -> " +
              (rows[i].status == "ok" ? fmt("%.4f", rows[i].metrics.mean_abs_J_minus_1) : rows[i].status);
    ok = ok && rows[i].status == "ok";
    if (i > 0 && ok) ok = rows[i].metrics.mean_abs_J_minus_1 < rows[i - 1].metrics.mean_abs_J_minus_1;
  }
  return {ok, detail};
}

Outcome scaling() {
  const SceneConfig scene = builtin_scenario("retraction");
  std::vector<Real> counts, ms;
  std::string detail = "single thread ms/frame:";
  for (std::size_t n : {6000, 12000, 24000, 48000}) {
    counts.push_back(static_cast<Real>(n));
    ms.push_back(bench_point(scene, n, 1));
    detail += " " + std::to_string(n / 1000) + "K=" + fmt("%.0f", ms.back());
  }
  const LineFit fit = fit_line(counts, ms);
  detail += ", R^2 " + fmt("%.4f", fit.r_squared) + ", slope " + fmt("%.2e", fit.slope) + " ms/particle";
  return {fit.r_squared >= 0.95 && fit.slope > 0, detail};
}

}  // namespace

int main() {
  const fs::path out_dir = fs::temp_directory_path() / ("mpmsim_acceptance_" + std::to_string(::getpid()));
  check("conservation: p2g mass and momentum within 1e-9 relative", 1, conservation);
  check("constitutive: P(I)=0, P(R)=0 within 1e-12, energy gradient within 1e-5", 1, constitutive);
  check("oracle: parallel substep matches reference within 1e-12", 5, oracle);
  check("collision: non-penetration, friction clamp, rotation, merged field", 2, collision);
  check("sdf: baked 256^3 unit cube within 2 cells", 10, sdf_fidelity);
  StabilityRun run;
  check("stability: retraction 24K particles for 120 frames", 300, [&] {
    run = stability(out_dir);
    return run.outcome;
  });
  check("timing: category taxonomy sums to total within 5%", 0, [&] { return timing_report(run); });
  check("stiffness: mean|J-1| strictly decreasing over E = 1e3..1e6", 0, stiffness);
  check("scaling: single thread ms/frame linear in particle count, R^2 >= 0.95", 0, scaling);
  fs::remove_all(out_dir);
  std::printf("%d check(s) failed\n", failures);
  return failures;
}
