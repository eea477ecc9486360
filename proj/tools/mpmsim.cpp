#include "server.hpp"

#include "mpmsim/driver.hpp"
#include "mpmsim/mesh.hpp"
#include "mpmsim/parallel.hpp"
#include "mpmsim/scenarios.hpp"
#include "mpmsim/sdf.hpp"
#include "mpmsim/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mpmsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SceneArgs {
  std::string scene_path;
  std::string scenario;
  std::optional<std::size_t> particles;
  std::optional<std::uint64_t> seed;
  std::optional<double> young_modulus;
  bool deterministic = false;
  std::optional<int> threads;
};

void add_scene_flags(CLI::App* cmd, SceneArgs& a) {
  cmd->add_option("--scene", a.scene_path, "Scene JSON file");
  cmd->add_option("--scenario", a.scenario, "Built-in scenario: push, pull, tear, tension, retraction");
  cmd->add_option("--particles", a.particles, "Override the total particle count");
  cmd->add_option("--seed", a.seed, "Override the sampling seed");
  cmd->add_option("-E,--young-modulus", a.young_modulus, "Override Young's modulus of every material (Pa)");
  cmd->add_flag("--deterministic", a.deterministic, "Bitwise reproducible accumulation");
  cmd->add_option("--threads", a.threads, "Worker threads (default: MPM_THREADS or all cores)");
}

void apply_threads(const std::optional<int>& threads) {
  if (threads) {
    set_thread_count(*threads);
  } else if (const char* env = std::getenv("MPM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) set_thread_count(n);
  }
}

/// Scene from flags plus its directory for relative asset paths.
std::pair<SceneConfig, fs::path> build_scene(const SceneArgs& a) {
  if (a.scene_path.empty() == a.scenario.empty())
    throw SceneError(SceneError::Code::missing_key, "give exactly one of --scene PATH or --scenario NAME");
  SceneConfig scene;
  fs::path base;
  if (!a.scene_path.empty()) {
    scene = load_scene(a.scene_path);
    base = fs::path(a.scene_path).parent_path();
  } else {
    scene = builtin_scenario(a.scenario);
  }
  if (a.particles) override_particle_count(scene, *a.particles);
  if (a.seed) override_seed(scene, *a.seed);
  if (a.young_modulus)
    for (auto& m : scene.materials) m.young_modulus = *a.young_modulus;
  if (a.deterministic) scene.params.deterministic = true;
  scene.validate();
  return {scene, base};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto comma = text.find(',', pos);
    const auto token = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

int cmd_run(SceneArgs& a, const std::string& positional_scene, std::string out_dir, std::optional<int> frames,
            bool no_mesh, bool dump_particles, bool oracle_check) {
  if (!positional_scene.empty()) {
    if (!a.scene_path.empty() || !a.scenario.empty()) {
      // A positional argument after --scene/--scenario is the output directory.
      if (out_dir.empty()) out_dir = positional_scene;
    } else {
      a.scene_path = positional_scene;
    }
  }
  apply_threads(a.threads);
  auto [scene, base] = build_scene(a);

  if (oracle_check) {
    constexpr int kSubsteps = 50;
    constexpr double kTolerance = 1e-12;
    const double dev = oracle_deviation(scene, kSubsteps, base);
    std::printf("oracle check: %zu particles, %d substeps, max |dx| = %.3e (tolerance %.0e)\n",
                scene.particle_count(), kSubsteps, dev, kTolerance);
    return dev <= kTolerance ? kExitOk : kExitNumerical;
  }

  if (out_dir.empty()) out_dir = "out";
  Simulation sim(scene, base);
  RunOptions opt;
  opt.frames = frames;
  opt.write_meshes = !no_mesh;
  opt.write_particles = dump_particles;
  opt.out_dir = out_dir;
  const auto result = run_frames(sim, opt);
  const auto& t = result.mean_timings;
  std::printf("%zu frames, %zu particles -> %s\n", result.frames, scene.particle_count(), out_dir.c_str());
  std::printf("mean ms/frame: collision %.2f, soft %.2f, marching cubes %.2f, export %.2f, other %.2f (total %.2f)\n",
              t.collision_detection, t.soft_simulation, t.marching_cubes, t.data_export, t.other, t.total);
  if (result.inverted_events) std::fprintf(stderr, "warning: %zu inverted-element events\n", result.inverted_events);
  return kExitOk;
}

int cmd_sweep(SceneArgs& a, const std::string& param, const std::string& values, const std::string& out_dir,
              std::optional<int> frames) {
  if (param != "E") throw SceneError(SceneError::Code::bad_value, "only --param E is supported");
  if (a.scene_path.empty() && a.scenario.empty()) a.scenario = "retraction";
  apply_threads(a.threads);
  auto [scene, base] = build_scene(a);
  std::vector<double> list;
  try {
    list = parse_list(values);
  } catch (const std::exception&) {
    throw SceneError(SceneError::Code::bad_value, "--values must be a comma separated list of numbers");
  }
  const auto rows = sweep_young_modulus(scene, list, frames, base);
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "sweep.csv");
  write_sweep_csv(csv, rows);
  write_sweep_csv(std::cout, rows);
  for (const auto& r : rows)
    if (r.status != "ok") std::fprintf(stderr, "E=%g: %s\n", r.value, r.message.c_str());
  return kExitOk;
}

int cmd_bench(SceneArgs& a, const std::string& counts, const std::string& threads, int frames,
              const std::string& out) {
  if (a.scene_path.empty() && a.scenario.empty()) a.scenario = "retraction";
  auto [scene, base] = build_scene(a);
  std::vector<double> count_list, thread_list;
  try {
    count_list = parse_list(counts);
    thread_list = threads.empty() ? std::vector<double>{1.0, static_cast<double>(thread_count())} : parse_list(threads);
  } catch (const std::exception&) {
    throw SceneError(SceneError::Code::bad_value, "--counts and --thread-counts take comma separated numbers");
  }
  std::ofstream file;
  if (!out.empty()) {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    file.open(out);
  }
  std::ostream& csv = out.empty() ? std::cout : file;
  csv << "particles,threads,ms_per_frame\n";
  std::vector<double> x, y;
  std::vector<int> seen;
  for (double th : thread_list) {
    const int nt = static_cast<int>(th);
    if (std::find(seen.begin(), seen.end(), nt) != seen.end()) continue;
    seen.push_back(nt);
    for (double c : count_list) {
      const double ms = bench_point(scene, static_cast<std::size_t>(c), nt, frames);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%d,%.3f\n", static_cast<std::size_t>(c), nt, ms);
      csv << buf << std::flush;
      if (nt == 1) {
        x.push_back(c);
        y.push_back(ms);
      }
    }
  }
  if (x.size() >= 2) {
    const auto fit = fit_line(x, y);
    std::fprintf(stderr, "single-thread fit: ms = %.4g * particles + %.4g, R^2 = %.4f\n", fit.slope, fit.intercept,
                 fit.r_squared);
  }
  return kExitOk;
}

int cmd_bake(const std::string& mesh_path, const std::string& out, int resolution) {
  const TriMesh mesh = load_mesh(mesh_path);
  BakeStats stats;
  const SdfGrid sdf = bake_sdf(mesh, resolution, &stats);
  save_sdf(out, sdf);
  std::printf("baked %s at %d^3 -> %s", mesh_path.c_str(), resolution, out.c_str());
  if (stats.degenerate_triangles) std::printf(" (%zu degenerate triangles skipped)", stats.degenerate_triangles);
  std::printf("\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MLS-MPM soft body simulator"};
  app.require_subcommand(1);

  SceneArgs run_args;
  std::string run_positional, run_positional_out, run_out;
  std::optional<int> run_frames_opt;
  bool no_mesh = false, dump_particles = false, oracle_check = false;
  auto* run = app.add_subcommand("run", "Simulate a scene and write meshes, metrics and timings");
  add_scene_flags(run, run_args);
  run->add_option("scene_file", run_positional, "Scene JSON file (alternative to --scene)");
  run->add_option("out_dir", run_positional_out, "Output directory (alternative to --out)");
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--frames", run_frames_opt, "Number of frames (default: scene duration)");
  run->add_flag("--no-mesh", no_mesh, "Skip surfacing and OBJ output");
  run->add_flag("--dump-particles", dump_particles, "Write per-frame particle CSV files");
  run->add_flag("--oracle-check", oracle_check, "Compare the optimized substep against the reference and exit");

  SceneArgs sweep_args;
  std::string sweep_param = "E", sweep_values = "1e3,1e4,1e5,1e6", sweep_out = "sweep_out";
  std::optional<int> sweep_frames;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario for several Young's modulus values");
  add_scene_flags(sweep, sweep_args);
  sweep->add_option("--param", sweep_param, "Swept parameter (E)");
  sweep->add_option("--values", sweep_values, "Comma separated values");
  sweep->add_option("--out", sweep_out, "Output directory for sweep.csv");
  sweep->add_option("--frames", sweep_frames, "Frames per run (default: scene duration)");

  SceneArgs bench_args;
  std::string bench_counts = "6000,12000,24000,48000", bench_threads, bench_out;
  int bench_frames = 3;
  auto* bench = app.add_subcommand("bench", "Time simulation per frame against particle count");
  add_scene_flags(bench, bench_args);
  bench->add_option("--counts", bench_counts, "Comma separated particle counts");
  bench->add_option("--thread-counts", bench_threads, "Comma separated thread counts (default: 1 and all cores)");
  bench->add_option("--frames", bench_frames, "Measured frames per point");
  bench->add_option("--out", bench_out, "CSV path (default: stdout)");

  std::string bake_mesh, bake_out;
  int bake_res = 256;
  auto* bake = app.add_subcommand("bake", "Bake a watertight OBJ/STL mesh to an SDF file");
  bake->add_option("mesh", bake_mesh, "Input mesh")->required();
  bake->add_option("out", bake_out, "Output .sdf file")->required();
  bake->add_option("--resolution", bake_res, "Lattice resolution per axis");

  SceneArgs dump_args;
  auto* dump = app.add_subcommand("dump-scene", "Print a scene as JSON after applying overrides");
  add_scene_flags(dump, dump_args);

  SceneArgs serve_args;
  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Interactive WebSocket session");
  add_scene_flags(serve, serve_args);
  serve->add_option("--bind", serve_opts.bind, "HOST:PORT");
  serve->add_option("--fps", serve_opts.session.frames_per_second, "Frames per second");
  serve->add_option("--max-speed", serve_opts.session.max_speed, "Tool speed limit (m/s)");
  serve->add_option("--max-frames", serve_opts.max_frames, "Stop after this many frames (0: run forever)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      if (!run_positional_out.empty() && run_out.empty()) run_out = run_positional_out;
      return cmd_run(run_args, run_positional, run_out, run_frames_opt, no_mesh, dump_particles, oracle_check);
    }
    if (*sweep) return cmd_sweep(sweep_args, sweep_param, sweep_values, sweep_out, sweep_frames);
    if (*bench) {
      apply_threads(bench_args.threads);
      return cmd_bench(bench_args, bench_counts, bench_threads, bench_frames, bench_out);
    }
    if (*bake) return cmd_bake(bake_mesh, bake_out, bake_res);
    if (*dump) {
      std::cout << scene_to_json(build_scene(dump_args).first).dump(2) << '\n';
      return kExitOk;
    }
    if (*serve) {
      apply_threads(serve_args.threads);
      auto [scene, base] = build_scene(serve_args);
      serve_opts.base_dir = base;
      const SceneArgs args = serve_args;
      return serve_scene(
          [args, scene = scene](const std::optional<std::string>& scenario) {
            if (!scenario) return scene;
            SceneArgs next = args;
            next.scene_path.clear();
            next.scenario = *scenario;
            return build_scene(next).first;
          },
          serve_opts);
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure at frame %zu: %s\n", e.frame(), e.what());
    return kExitNumerical;
  } catch (const SceneError& e) {
    std::fprintf(stderr, "scene error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
