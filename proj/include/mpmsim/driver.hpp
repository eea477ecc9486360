#pragma once

// Headless batch drivers shared by the command line tool and the tests.

#include "mpmsim/metrics.hpp"
#include "mpmsim/parallel.hpp"
#include "mpmsim/scenarios.hpp"
#include "mpmsim/simulation.hpp"
#include "mpmsim/surfacing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mpmsim {

/// Splits `total` over the scene's bodies in proportion to their current counts.
inline void override_particle_count(SceneConfig& scene, std::size_t total) {
  if (scene.bodies.empty() || total == 0) throw SceneError(SceneError::Code::bad_value, "particle count must be positive");
  const std::size_t before = scene.particle_count();
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < scene.bodies.size(); ++b) {
    auto& body = scene.bodies[b];
    if (b + 1 == scene.bodies.size()) {
      body.count = total - assigned;
    } else {
      body.count = std::max<std::size_t>(1, total * body.count / before);
      assigned += body.count;
    }
  }
}

inline void override_seed(SceneConfig& scene, std::uint64_t seed) {
  for (std::size_t b = 0; b < scene.bodies.size(); ++b) scene.bodies[b].seed = seed + b;
}

struct RunOptions {
  std::optional<int> frames;
  bool write_meshes = true;
  bool write_particles = false;
  std::filesystem::path out_dir;  // empty: nothing written
  std::function<void(std::size_t frame, const MetricSample&)> on_frame;
};

struct RunResult {
  std::size_t frames = 0;
  MetricSample final_metrics;
  FrameTimings mean_timings;
  std::size_t inverted_events = 0;
};

inline void write_particles_csv(const std::filesystem::path& path, const SimState& state) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "x,y,z,J\n";
  char buf[128];
  for (const auto& p : state.particles) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", p.x.x(), p.x.y(), p.x.z(), p.F.determinant());
    out << buf;
  }
}

/// Steps the simulation frame by frame, surfacing and exporting each frame.
/// Throws NumericalError on the first non-finite frame.
inline RunResult run_frames(Simulation& sim, const RunOptions& opt) {
  const int frames = opt.frames.value_or(sim.scene().frame_count());
  const bool export_files = !opt.out_dir.empty();
  std::ofstream metrics_csv;
  if (export_files) {
    std::filesystem::create_directories(opt.out_dir);
    metrics_csv.open(opt.out_dir / "metrics.csv");
    if (!metrics_csv) throw Error("cannot write " + (opt.out_dir / "metrics.csv").string());
    metrics_csv << kMetricsHeader << '\n';
  }
  RunResult result;
  FrameTimings sum;
  for (int f = 0; f < frames; ++f) {
    const auto frame_start = detail::Clock::now();
    FrameTimings t;
    const StepReport report = sim.advance();
    t.collision_detection = report.collision_detection_ms;
    t.soft_simulation = report.soft_simulation_ms;
    t.other = report.other_ms;
    result.inverted_events += report.inverted_events;

    SurfaceMesh mesh;
    if (opt.write_meshes) {
      const auto t0 = detail::Clock::now();
      mesh = sim.surface();
      t.marching_cubes = detail::elapsed_ms(t0);
    }

    auto t0 = detail::Clock::now();
    const MetricSample m = sim.metrics();
    t.other += detail::elapsed_ms(t0);

    t0 = detail::Clock::now();
    if (export_files) {
      if (opt.write_meshes) write_obj(opt.out_dir / frame_filename(static_cast<std::size_t>(f)), mesh);
      if (opt.write_particles)
        write_particles_csv(opt.out_dir / frame_filename(static_cast<std::size_t>(f), "csv"), sim.state());
      metrics_csv << metrics_row(m) << '\n';
    }
    t.data_export = detail::elapsed_ms(t0);

    if (opt.on_frame) {
      t0 = detail::Clock::now();
      opt.on_frame(static_cast<std::size_t>(f), m);
      t.other += detail::elapsed_ms(t0);
    }
    t.total = detail::elapsed_ms(frame_start);
    sum += t;
    result.final_metrics = m;
    ++result.frames;
  }
  if (result.frames > 0) result.mean_timings = sum.scaled(1.0 / static_cast<Real>(result.frames));
  if (export_files) {
    std::ofstream timings(opt.out_dir / "timings.csv");
    if (!timings) throw Error("cannot write " + (opt.out_dir / "timings.csv").string());
    const auto& m = result.mean_timings;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.4f", m.collision_detection, m.soft_simulation,
                  m.marching_cubes, m.data_export, m.other);
    timings << kTimingsHeader << '\n' << buf << '\n';
  }
  return result;
}

struct SweepRow {
  Real value = 0;
  std::string status = "ok";  // ok, config_error, numerical_failure
  std::string message;
  MetricSample metrics;
};

/// One run per Young's modulus value; failures are recorded and the sweep
/// continues.
inline std::vector<SweepRow> sweep_young_modulus(const SceneConfig& scene, const std::vector<Real>& values,
                                                 std::optional<int> frames, const std::filesystem::path& base_dir = {}) {
  std::vector<SweepRow> rows;
  for (Real E : values) {
    SweepRow row;
    row.value = E;
    try {
      SceneConfig s = scene;
      for (auto& m : s.materials) m.young_modulus = E;
      Simulation sim(s, base_dir);
      RunOptions opt;
      opt.frames = frames;
      opt.write_meshes = false;
      row.metrics = run_frames(sim, opt).final_metrics;
    } catch (const NumericalError& e) {
      row.status = "numerical_failure";
      row.message = e.what();
    } catch (const Error& e) {
      row.status = "config_error";
      row.message = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "E,status," << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", r.value);
    out << buf << ',' << r.status << ',';
    if (r.status == "ok") out << metrics_row(r.metrics);
    else out << ",,,,";
    out << '\n';
  }
}

struct BenchRow {
  std::size_t particles = 0;
  int threads = 1;
  Real ms_per_frame = 0;
};

/// Wall-clock simulation milliseconds per frame (collision detection plus soft
/// simulation, no surfacing) for `scene` resized to `particles`. The fastest of
/// `frames` measured frames after `warmup` frames is reported.
inline Real bench_point(SceneConfig scene, std::size_t particles, int threads, int frames = 3, int warmup = 1) {
  override_particle_count(scene, particles);
  const int previous = thread_count();
  set_thread_count(threads);
  Simulation sim(scene);
  for (int f = 0; f < warmup; ++f) sim.advance();
  Real best = std::numeric_limits<Real>::infinity();
  for (int f = 0; f < frames; ++f) {
    const auto r = sim.advance();
    best = std::min(best, r.collision_detection_ms + r.soft_simulation_ms);
  }
  set_thread_count(previous);
  return best;
}

struct LineFit {
  Real slope = 0;
  Real intercept = 0;
  Real r_squared = 0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LineFit fit_line(const std::vector<Real>& x, const std::vector<Real>& y) {
  LineFit fit;
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return fit;
  const Real mx = std::accumulate(x.begin(), x.begin() + n, 0.0) / n;
  const Real my = std::accumulate(y.begin(), y.begin() + n, 0.0) / n;
  Real sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace mpmsim
