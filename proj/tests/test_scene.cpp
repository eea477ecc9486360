#include "mpmsim/scenarios.hpp"
#include "mpmsim/scene.hpp"
#include "mpmsim/simulation.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace mpmsim;
using nlohmann::json;
using Code = SceneError::Code;

namespace {

json minimal_scene() {
  return json::parse(R"({
    "name": "t",
    "domain": { "extent": [1, 1, 1], "resolution": 16 },
    "materials": [ { "young_modulus": 10000 } ],
    "bodies": [ { "shape": "box", "center": [0.5, 0.4, 0.5], "size": [0.2, 0.2, 0.2], "count": 100 } ],
    "colliders": [
      { "id": 3, "shape": "box", "half_extents": [0.05, 0.05, 0.05], "group": "tool" }
    ],
    "trajectory": [
      { "time": 0, "poses": [ { "collider": 3, "position": [0.5, 0.7, 0.5] } ] },
      { "time": 0.5, "poses": [ { "collider": 3, "position": [0.5, 0.6, 0.5], "jaw": "closed" } ] }
    ],
    "duration": 0.05
  })");
}

Code code_of(const json& doc) {
  try {
    scene_from_json(doc);
  } catch (const SceneError& e) {
    return e.code();
  }
  ADD_FAILURE() << "scene was accepted";
  return Code::syntax;
}

}  // namespace

TEST(Scene, MinimalParses) {
  const SceneConfig s = scene_from_json(minimal_scene());
  EXPECT_EQ(s.particle_count(), 100u);
  EXPECT_EQ(s.colliders.size(), 1u);
  EXPECT_EQ(s.colliders[0].group, "tool");
  ASSERT_EQ(s.trajectory.size(), 2u);
  EXPECT_EQ(s.trajectory[1].poses[0].jaw, JawState::closed);
  EXPECT_EQ(s.frame_count(), 4);
  EXPECT_NEAR(s.frame_dt(), 0.0125, 1e-15);
}

TEST(Scene, ValidationErrorsAreDistinct) {
  {
    json d = minimal_scene();
    d["bodies"][0]["colour"] = "red";
    EXPECT_EQ(code_of(d), Code::unknown_key);
  }
  {
    json d = minimal_scene();
    d.erase("duration");
    EXPECT_EQ(code_of(d), Code::missing_key);
  }
  {
    json d = minimal_scene();
    d["bodies"][0]["center"] = {0.05, 0.4, 0.5};
    EXPECT_EQ(code_of(d), Code::out_of_domain_spawn);
  }
  {
    json d = minimal_scene();
    d["trajectory"][1]["time"] = 0;
    EXPECT_EQ(code_of(d), Code::non_increasing_keyframes);
  }
  {
    json d = minimal_scene();
    d["bodies"][0]["material"] = 4;
    EXPECT_EQ(code_of(d), Code::dangling_material);
  }
  {
    json d = minimal_scene();
    d["trajectory"][0]["poses"][0]["collider"] = 9;
    EXPECT_EQ(code_of(d), Code::dangling_collider);
  }
  {
    json d = minimal_scene();
    d["colliders"].push_back(d["colliders"][0]);
    d["trajectory"] = json::array();
    EXPECT_EQ(code_of(d), Code::duplicate_collider_id);
  }
  {
    json d = minimal_scene();
    d["materials"][0]["poisson_ratio"] = 0.5;
    EXPECT_EQ(code_of(d), Code::bad_value);
  }
  {
    json d = minimal_scene();
    d["trajectory"][0]["poses"][0]["orientation"] = {0, 0, 0, 2};
    EXPECT_EQ(code_of(d), Code::bad_value);
  }
}

TEST(Scene, SyntaxErrorFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "mpmsim_bad_scene.json";
  std::ofstream(path) << "{ \"name\": ";
  try {
    load_scene(path);
    FAIL();
  } catch (const SceneError& e) {
    EXPECT_EQ(e.code(), Code::syntax);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_scene("/nonexistent/scene.json"), SceneError);
}

TEST(Scene, JsonRoundTrip) {
  const SceneConfig a = scene_from_json(minimal_scene());
  const SceneConfig b = scene_from_json(scene_to_json(a));
  EXPECT_EQ(scene_to_json(a), scene_to_json(b));
  for (const auto& name : scenario_names()) {
    const SceneConfig s = builtin_scenario(name);
    EXPECT_EQ(scene_to_json(scene_from_json(scene_to_json(s))), scene_to_json(s)) << name;
  }
}

TEST(Scenarios, RetractionDefaults) {
  const SceneConfig s = builtin_scenario("retraction");
  EXPECT_EQ(s.particle_count(), 24000u);
  ASSERT_EQ(s.materials.size(), 1u);
  EXPECT_EQ(s.materials[0].density, 1000);
  EXPECT_EQ(s.materials[0].young_modulus, 1e4);
  EXPECT_EQ(s.frame_count(), 120);
  EXPECT_NO_THROW(s.validate());
}

TEST(Scenarios, AllValidWithDistinctIds) {
  for (const auto& name : scenario_names()) {
    const SceneConfig s = builtin_scenario(name);
    EXPECT_NO_THROW(s.validate()) << name;
    std::set<int> ids;
    for (const auto& c : s.colliders) EXPECT_TRUE(ids.insert(c.id).second) << name;
  }
  const SceneConfig tear = builtin_scenario("tear");
  std::set<std::string> groups;
  for (const auto& c : tear.colliders) groups.insert(c.group);
  EXPECT_EQ(groups.size(), 2u);
}

TEST(Scenarios, OptionsOverride) {
  ScenarioOptions opt;
  opt.particles = 6000;
  opt.young_modulus = 1e5;
  opt.seed = 42;
  const SceneConfig s = builtin_scenario("pull", opt);
  EXPECT_EQ(s.particle_count(), 6000u);
  EXPECT_EQ(s.materials[0].young_modulus, 1e5);
  EXPECT_EQ(s.bodies[0].seed, 42u);
}

TEST(Scenarios, UnknownNameListsChoices) {
  try {
    builtin_scenario("sutures");
    FAIL();
  } catch (const SceneError& e) {
    EXPECT_EQ(e.code(), Code::unknown_scenario);
    EXPECT_NE(std::string(e.what()).find("retraction"), std::string::npos);
  }
}

TEST(Trajectory, LinearMidpoint) {
  std::vector<Keyframe> traj(2);
  traj[0].time = 0;
  traj[0].poses = {ColliderPose{Vec3(0, 0, 0)}};
  traj[1].time = 1;
  traj[1].poses = {ColliderPose{Vec3(1, 2, 0)}};
  const auto kin = pose_at(traj, 0.5);
  ASSERT_EQ(kin.size(), 1u);
  EXPECT_LT((kin[0].translation - Vec3(0.5, 1, 0)).norm(), 1e-15);
  EXPECT_LT((kin[0].linear_velocity - Vec3(1, 2, 0)).norm(), 1e-15);
}

TEST(Trajectory, HoldsAtRestOutsideRange) {
  std::vector<Keyframe> traj(2);
  traj[0].time = 0.2;
  traj[0].poses = {ColliderPose{Vec3(0, 0, 0)}};
  traj[1].time = 1;
  traj[1].poses = {ColliderPose{Vec3(1, 0, 0)}};
  for (Real t : {0.0, 2.0}) {
    const auto kin = pose_at(traj, t);
    EXPECT_EQ(kin[0].linear_velocity, Vec3::Zero());
    EXPECT_EQ(kin[0].angular_velocity, Vec3::Zero());
  }
  EXPECT_EQ(pose_at(traj, 2.0)[0].translation, Vec3(1, 0, 0));
}

TEST(Trajectory, QuarterTurnAngularVelocity) {
  std::vector<Keyframe> traj(2);
  traj[0].time = 0;
  traj[0].poses = {ColliderPose{}};
  traj[1].time = 1;
  ColliderPose turned;
  turned.orientation = Quat(Eigen::AngleAxis<Real>(std::numbers::pi / 2, Vec3::UnitZ()));
  traj[1].poses = {turned};
  const auto kin = pose_at(traj, 0.5);
  EXPECT_LT((kin[0].angular_velocity - Vec3(0, 0, std::numbers::pi / 2)).norm(), 1e-12);
  EXPECT_NEAR(Eigen::AngleAxis<Real>(kin[0].orientation).angle(), std::numbers::pi / 4, 1e-12);
}

TEST(Trajectory, JawHeldFromSegmentStart) {
  std::vector<Keyframe> traj(2);
  traj[0].time = 0;
  traj[0].poses = {ColliderPose{Vec3::Zero(), Quat::Identity(), JawState::open}};
  traj[1].time = 1;
  traj[1].poses = {ColliderPose{Vec3::Zero(), Quat::Identity(), JawState::closed}};
  EXPECT_EQ(pose_at(traj, 0.99)[0].jaw, JawState::open);
  EXPECT_EQ(pose_at(traj, 1.0)[0].jaw, JawState::closed);
}

TEST(SimulationBuild, SdfColliderLoadsWithoutBaking) {
  const auto dir = std::filesystem::temp_directory_path() / "mpmsim_sdf_scene";
  std::filesystem::create_directories(dir);
  save_sdf(dir / "tool.sdf", bake_sdf(make_box_mesh(Vec3::Zero(), Vec3::Constant(0.1)), 16));
  json d = minimal_scene();
  d["colliders"][0] = json::parse(R"({ "id": 3, "shape": "sdf", "path": "tool.sdf", "group": "tool" })");
  const SceneConfig scene = scene_from_json(d);
  const std::size_t bakes = sdf_bake_count();
  Simulation sim(scene, dir);
  for (int f = 0; f < 2; ++f) sim.advance();
  EXPECT_EQ(sdf_bake_count(), bakes);
  EXPECT_TRUE(std::holds_alternative<BakedShape>(sim.colliders()[0].shape));
  std::filesystem::remove_all(dir);
}

TEST(SimulationBuild, ClosedJawMakesContactSticky) {
  Simulation sim(scene_from_json(minimal_scene()));
  EXPECT_EQ(sim.colliders()[0].mode, ContactMode::coulomb);
  sim.apply_kinematics(0.6);
  EXPECT_EQ(sim.jaws()[0], JawState::closed);
  EXPECT_EQ(sim.colliders()[0].mode, ContactMode::sticky);
}

TEST(SimulationBuild, ResetRestoresInitialState) {
  Simulation sim(scene_from_json(minimal_scene()));
  const auto x0 = sim.state().particles[5].x;
  sim.advance();
  EXPECT_NE(sim.state().particles[5].x, x0);
  sim.reset();
  EXPECT_EQ(sim.state().particles[5].x, x0);
  EXPECT_EQ(sim.frame_index(), 0u);
  EXPECT_EQ(sim.state().time, 0);
}
