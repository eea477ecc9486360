#pragma once

#include "mpmsim/collider.hpp"
#include "mpmsim/mesh.hpp"
#include "mpmsim/metrics.hpp"
#include "mpmsim/reference.hpp"
#include "mpmsim/sampling.hpp"
#include "mpmsim/scene.hpp"
#include "mpmsim/sdf.hpp"
#include "mpmsim/solver.hpp"
#include "mpmsim/surfacing.hpp"
#include "mpmsim/trajectory.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mpmsim {

/// Non-finite particle state after a frame.
class NumericalError : public Error {
 public:
  NumericalError(std::size_t frame, const std::string& what) : Error(what), frame_(frame) {}
  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

/// Mean wall-clock milliseconds per category for a frame.
struct FrameTimings {
  Real collision_detection = 0;
  Real soft_simulation = 0;
  Real marching_cubes = 0;
  Real data_export = 0;
  Real other = 0;
  Real total = 0;

  Real category_sum() const { return collision_detection + soft_simulation + marching_cubes + data_export + other; }
  FrameTimings& operator+=(const FrameTimings& o) {
    collision_detection += o.collision_detection;
    soft_simulation += o.soft_simulation;
    marching_cubes += o.marching_cubes;
    data_export += o.data_export;
    other += o.other;
    total += o.total;
    return *this;
  }
  FrameTimings scaled(Real s) const {
    return {collision_detection * s, soft_simulation * s, marching_cubes * s, data_export * s, other * s, total * s};
  }
};

inline constexpr const char* kTimingsHeader = "collision_detection,soft_simulation,marching_cubes,data_export,other";

/// Externally commanded motion for one collider over the next frame.
struct ColliderCommand {
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  JawState jaw = JawState::open;
};

/// Owns a simulation built from a scene: particles, colliders, kinematics.
class Simulation {
 public:
  /// Relative mesh and SDF paths resolve against base_dir.
  explicit Simulation(SceneConfig scene, std::filesystem::path base_dir = {})
      : scene_(std::move(scene)), base_dir_(std::move(base_dir)) {
    scene_.validate();
    build();
  }

  const SceneConfig& scene() const { return scene_; }
  SimState& state() { return state_; }
  const SimState& state() const { return state_; }
  const std::vector<Material>& materials() const { return materials_; }
  std::vector<RigidCollider>& colliders() { return colliders_; }
  const std::vector<RigidCollider>& colliders() const { return colliders_; }
  const std::vector<JawState>& jaws() const { return jaws_; }
  const MetricBaseline& baseline() const { return baseline_; }
  std::size_t frame_index() const { return frame_; }

  void reset() {
    frame_ = 0;
    commands_.reset();
    build();
  }

  /// Replaces stiffness of every material; densities and particle masses stay.
  void set_material(Real young_modulus, Real poisson_ratio) {
    std::vector<Material> next;
    for (const auto& m : materials_) next.emplace_back(young_modulus, poisson_ratio, m.density());
    materials_ = std::move(next);
    for (auto& m : scene_.materials) {
      m.young_modulus = young_modulus;
      m.poisson_ratio = poisson_ratio;
    }
  }

  /// Switches from the scripted trajectory to commanded velocities, one entry
  /// per collider, held for subsequent frames until replaced.
  void command(std::vector<ColliderCommand> commands) {
    if (commands.size() != colliders_.size()) throw ParameterError("one command per collider required");
    commands_ = std::move(commands);
    for (std::size_t c = 0; c < colliders_.size(); ++c) {
      colliders_[c].linear_velocity = (*commands_)[c].linear_velocity;
      colliders_[c].angular_velocity = (*commands_)[c].angular_velocity;
      jaws_[c] = (*commands_)[c].jaw;
      colliders_[c].mode = contact_mode(c);
    }
  }
  bool commanded() const { return commands_.has_value(); }

  /// Poses colliders for simulated time t.
  void apply_kinematics(Real t) {
    if (commands_) {
      const Real h = t - kinematics_time_;
      if (h > 0)
        for (auto& c : colliders_) {
          c.translation += h * c.linear_velocity;
          const Real w = c.angular_velocity.norm();
          if (w > 0) {
            const Mat3 dR = Eigen::AngleAxis<Real>(w * h, c.angular_velocity / w).toRotationMatrix();
            c.rotation = dR * c.rotation;
          }
        }
    } else if (!scene_.trajectory.empty()) {
      const auto kin = pose_at(scene_.trajectory, t);
      for (std::size_t c = 0; c < colliders_.size(); ++c) {
        colliders_[c].translation = kin[c].translation;
        colliders_[c].rotation = kin[c].orientation.toRotationMatrix();
        colliders_[c].linear_velocity = kin[c].linear_velocity;
        colliders_[c].angular_velocity = kin[c].angular_velocity;
        jaws_[c] = kin[c].jaw;
        colliders_[c].mode = contact_mode(c);
      }
    }
    kinematics_time_ = t;
  }

  /// Advances one frame. Throws NumericalError if the state stops being finite.
  StepReport advance() {
    const auto report = step(state_, materials_, scene_.params, colliders_,
                             [this](Real t, std::vector<RigidCollider>&) { apply_kinematics(t); });
    // Colliders report their pose at the end of the frame, after the last substep's motion.
    apply_kinematics(state_.time);
    ++frame_;
    if (!state_is_finite(state_))
      throw NumericalError(frame_, "non-finite particle state at frame " + std::to_string(frame_));
    return report;
  }

  /// Iso level of the extracted surface in kg/m^3.
  Real iso_level() const {
    Real rho = materials_.front().density();
    for (const auto& m : materials_) rho = std::min(rho, m.density());
    return scene_.iso_fraction * rho;
  }

  SurfaceMesh surface() const {
    const auto field = splat_density(state_.particles, state_.grid.resolution(), state_.grid.dx());
    auto mesh = marching_cubes(field, iso_level());
    compute_uvs(mesh, scene_.domain);
    return mesh;
  }

  MetricSample metrics() const { return compute_metrics(state_, baseline_); }

 private:
  ContactMode contact_mode(std::size_t c) const {
    return jaws_[c] == JawState::closed ? ContactMode::sticky : scene_.colliders[c].mode;
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir_.empty() ? path : base_dir_ / path;
  }

  void build() {
    state_ = SimState(scene_.domain);
    state_.collision.resize(state_.grid.size());
    materials_.clear();
    for (const auto& m : scene_.materials) materials_.push_back(m.build());

    const Real dx = state_.grid.dx();
    const auto& res = state_.grid.resolution();
    for (std::size_t b = 0; b < scene_.bodies.size(); ++b) {
      const auto& body = scene_.bodies[b];
      ParticleSpawn spawn;
      if (body.kind == BodySpec::Kind::box) {
        spawn = sample_box(body.center, body.size, body.count, body.seed, body.material);
      } else {
        TriMesh mesh = load_mesh(resolve(body.mesh_path));
        mesh.transform(body.scale, body.translate);
        spawn = sample_mesh_volume(mesh, body.count, body.seed, body.material);
      }
      for (const auto& x : spawn.positions)
        for (int a = 0; a < 3; ++a)
          if (x[a] < 1.5 * dx || x[a] > (res[a] - 2.5) * dx)
            throw SceneError(SceneError::Code::out_of_domain_spawn,
                             "body " + std::to_string(b) + " spawns particles outside the domain interior margin");
      add_particles(state_, spawn, materials_[body.material]);
    }

    colliders_.clear();
    jaws_.assign(scene_.colliders.size(), JawState::open);
    std::map<std::string, std::shared_ptr<const SdfGrid>> sdfs;
    for (const auto& spec : scene_.colliders) {
      RigidCollider c;
      c.id = spec.id;
      c.friction = spec.friction;
      c.mode = spec.mode;
      c.group = spec.group;
      c.translation = spec.initial.position;
      c.rotation = spec.initial.orientation.normalized().toRotationMatrix();
      if (spec.kind == ColliderSpec::Kind::box) {
        c.shape = AnalyticBox{spec.half_extents};
      } else {
        auto& sdf = sdfs[spec.sdf_path];
        if (!sdf) sdf = std::make_shared<const SdfGrid>(load_sdf(resolve(spec.sdf_path)));
        c.shape = BakedShape{sdf, spec.lookup};
      }
      colliders_.push_back(std::move(c));
    }
    for (std::size_t c = 0; c < colliders_.size(); ++c) jaws_[c] = scene_.colliders[c].initial.jaw;
    kinematics_time_ = 0;
    apply_kinematics(0);
    baseline_ = MetricBaseline(state_);
  }

  SceneConfig scene_;
  std::filesystem::path base_dir_;
  SimState state_;
  std::vector<Material> materials_;
  std::vector<RigidCollider> colliders_;
  std::vector<JawState> jaws_;
  std::optional<std::vector<ColliderCommand>> commands_;
  MetricBaseline baseline_;
  Real kinematics_time_ = 0;
  std::size_t frame_ = 0;
};

/// Largest per-coordinate difference in particle positions between the
/// optimized substep and the single-threaded reference after `substeps`.
inline Real oracle_deviation(const SceneConfig& scene, int substeps, const std::filesystem::path& base_dir = {}) {
  Simulation fast(scene, base_dir), slow(scene, base_dir);
  for (int s = 0; s < substeps; ++s) {
    fast.apply_kinematics(fast.state().time);
    slow.apply_kinematics(slow.state().time);
    substep(fast.state(), fast.materials(), scene.params, fast.colliders());
    reference::substep(slow.state(), slow.materials(), scene.params, slow.colliders());
  }
  Real worst = 0;
  for (std::size_t p = 0; p < fast.state().particles.size(); ++p) {
    const Real d = (fast.state().particles[p].x - slow.state().particles[p].x).cwiseAbs().maxCoeff();
    if (!std::isfinite(d)) return std::numeric_limits<Real>::infinity();
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace mpmsim
