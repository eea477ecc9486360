#pragma once

#include "mpmsim/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mpmsim {

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"push", "pull", "tear", "tension", "retraction"};
  return names;
}

/// Stiffness values of the default retraction sweep, in Pa.
inline const std::vector<Real>& retraction_sweep_moduli() {
  static const std::vector<Real> values = {1e3, 1e4, 1e5, 1e6};
  return values;
}

struct ScenarioOptions {
  std::optional<std::size_t> particles;
  std::optional<Real> young_modulus;
  std::optional<std::uint64_t> seed;
};

namespace detail {

/// Scenario geometry is laid out in grid cells of a 64^3 lattice spanning
/// kScenarioExtent meters per side.
inline constexpr Real kScenarioExtent = 2.0;
inline constexpr int kScenarioResolution = 64;

struct ScenarioLayout {
  Real dx = kScenarioExtent / kScenarioResolution;
  Vec3 cells(Real x, Real y, Real z) const { return Vec3(x, y, z) * dx; }
  // Slab resting on the floor band.
  Real slab_bottom() const { return 3 * dx; }
  Real slab_top() const { return 8 * dx; }
  Vec3 slab_center() const { return Vec3(32 * dx, 0.5 * (slab_bottom() + slab_top()), 32 * dx); }
  Vec3 slab_size() const { return cells(32, 5, 20); }
  // Gripper jaws: thin plates facing along x.
  Vec3 jaw_half_extents() const { return cells(1, 2, 4); }
  Real jaw_open_offset() const { return 3.5 * dx; }
  Real jaw_closed_offset() const { return 1.25 * dx; }
  // Jaw center height once the tips sit 2 cells into the slab.
  Real grasp_height() const { return slab_top() - 2 * dx + jaw_half_extents().y(); }
  Real hover_height() const { return slab_top() + 4 * dx + jaw_half_extents().y(); }
};

inline SceneConfig base_scene(const std::string& name, const ScenarioOptions& opt, std::size_t default_particles,
                              Real default_modulus) {
  const ScenarioLayout L;
  SceneConfig s;
  s.name = name;
  s.domain.extent = Vec3::Constant(kScenarioExtent);
  s.domain.resolution = {kScenarioResolution, kScenarioResolution, kScenarioResolution};
  s.params = SimParams{};
  MaterialSpec tissue;
  tissue.young_modulus = opt.young_modulus.value_or(default_modulus);
  tissue.poisson_ratio = 0.3;
  tissue.density = 1000;
  s.materials = {tissue};
  BodySpec slab;
  slab.kind = BodySpec::Kind::box;
  slab.center = L.slab_center();
  slab.size = L.slab_size();
  slab.count = opt.particles.value_or(default_particles);
  slab.seed = opt.seed.value_or(7);
  slab.material = 0;
  s.bodies = {slab};
  return s;
}

/// Adds two jaw colliders of one gripper and returns their slots.
inline std::array<std::size_t, 2> add_gripper(SceneConfig& s, ColliderId first_id, const std::string& group) {
  const ScenarioLayout L;
  std::array<std::size_t, 2> slots{};
  for (int j = 0; j < 2; ++j) {
    ColliderSpec jaw;
    jaw.id = static_cast<ColliderId>(first_id + j);
    jaw.kind = ColliderSpec::Kind::box;
    jaw.half_extents = L.jaw_half_extents();
    jaw.friction = 0.5;
    jaw.mode = ContactMode::coulomb;
    jaw.group = group;
    slots[j] = s.colliders.size();
    s.colliders.push_back(jaw);
  }
  return slots;
}

inline void pose_gripper(Keyframe& key, std::array<std::size_t, 2> slots, const Vec3& center, JawState jaw) {
  const ScenarioLayout L;
  const Real offset = jaw == JawState::closed ? L.jaw_closed_offset() : L.jaw_open_offset();
  key.poses[slots[0]] = {center - Vec3(offset, 0, 0), Quat::Identity(), jaw};
  key.poses[slots[1]] = {center + Vec3(offset, 0, 0), Quat::Identity(), jaw};
}

/// Keyframes for grippers that descend open, close, then travel by `travel`
/// (one entry per gripper) until `move_end`, then hold until `end`.
inline void grasp_and_move(SceneConfig& s, const std::vector<std::array<std::size_t, 2>>& grippers,
                           const std::vector<Real>& grasp_x, const std::vector<Vec3>& travel, Real move_end,
                           Real end) {
  const ScenarioLayout L;
  const Real z = L.slab_center().z();
  const Real times[] = {0.0, 0.15, 0.25, move_end, end};
  for (int k = 0; k < 5; ++k) {
    Keyframe key;
    key.time = times[k];
    key.poses.resize(s.colliders.size());
    for (std::size_t g = 0; g < grippers.size(); ++g) {
      Vec3 c(grasp_x[g], k == 0 ? L.hover_height() : L.grasp_height(), z);
      if (k >= 3) c += travel[g];
      pose_gripper(key, grippers[g], c, k >= 2 ? JawState::closed : JawState::open);
    }
    s.trajectory.push_back(std::move(key));
  }
  for (std::size_t c = 0; c < s.colliders.size(); ++c) s.colliders[c].initial = s.trajectory.front().poses[c];
}

}  // namespace detail

/// One of the built-in manipulation tasks on a tissue slab resting on the floor.
inline SceneConfig builtin_scenario(const std::string& name, const ScenarioOptions& opt = {}) {
  using namespace detail;
  const ScenarioLayout L;
  SceneConfig s;
  if (name == "retraction") {
    s = base_scene(name, opt, 24000, 1e4);
    const auto g = add_gripper(s, 0, "gripper");
    grasp_and_move(s, {g}, {44 * L.dx}, {L.cells(-6, 12, 0)}, 1.0, 1.5);
    s.duration = 1.5;
  } else if (name == "pull") {
    s = base_scene(name, opt, 30000, 1e4);
    const auto g = add_gripper(s, 0, "gripper");
    grasp_and_move(s, {g}, {44 * L.dx}, {L.cells(10, 2, 0)}, 0.8, 1.0);
    s.duration = 1.0;
  } else if (name == "tension") {
    s = base_scene(name, opt, 30000, 1e4);
    const auto g = add_gripper(s, 0, "gripper");
    grasp_and_move(s, {g}, {44 * L.dx}, {L.cells(8, 12, 0)}, 0.8, 1.0);
    s.duration = 1.0;
  } else if (name == "tear") {
    s = base_scene(name, opt, 30000, 3e3);
    const auto left = add_gripper(s, 0, "left");
    const auto right = add_gripper(s, 2, "right");
    grasp_and_move(s, {left, right}, {26 * L.dx, 38 * L.dx}, {L.cells(-12, 4, 0), L.cells(12, 4, 0)}, 0.8, 1.0);
    s.duration = 1.0;
  } else if (name == "push") {
    s = base_scene(name, opt, 30000, 1e4);
    ColliderSpec tool;
    tool.id = 0;
    tool.kind = ColliderSpec::Kind::box;
    tool.half_extents = L.cells(4, 3, 4);
    tool.friction = 0.5;
    tool.mode = ContactMode::coulomb;
    tool.group = "tool";
    s.colliders = {tool};
    const Vec3 above(32 * L.dx, L.slab_top() + 5 * L.dx, L.slab_center().z());
    const Vec3 pressed = above - L.cells(0, 7, 0);
    const std::pair<Real, Vec3> keys[] = {{0.0, above}, {0.5, pressed}, {0.7, pressed}, {1.0, above}};
    for (const auto& [t, p] : keys) s.trajectory.push_back({t, {{p, Quat::Identity(), JawState::open}}});
    s.colliders[0].initial = s.trajectory.front().poses[0];
    s.duration = 1.0;
  } else {
    std::string valid;
    for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw SceneError(SceneError::Code::unknown_scenario, "unknown scenario '" + name + "'; valid names: " + valid);
  }
  s.validate();
  return s;
}

}  // namespace mpmsim
