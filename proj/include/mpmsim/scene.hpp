#pragma once

#include "mpmsim/collider.hpp"
#include "mpmsim/grid.hpp"
#include "mpmsim/material.hpp"
#include "mpmsim/state.hpp"
#include "mpmsim/trajectory.hpp"
#include "mpmsim/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

namespace mpmsim {

/// Scene validation or parsing failure. code() distinguishes the cause.
class SceneError : public Error {
 public:
  enum class Code {
    syntax,
    unknown_key,
    missing_key,
    bad_value,
    out_of_domain_spawn,
    non_increasing_keyframes,
    dangling_material,
    dangling_collider,
    duplicate_collider_id,
    unknown_scenario,
  };

  SceneError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct MaterialSpec {
  Real young_modulus = 1e4;
  Real poisson_ratio = 0.3;
  Real density = 1000;

  Material build() const { return Material(young_modulus, poisson_ratio, density); }
};

struct BodySpec {
  enum class Kind { box, mesh };
  Kind kind = Kind::box;
  Vec3 center = Vec3::Constant(0.5);  // box
  Vec3 size = Vec3::Constant(0.2);    // box
  std::string mesh_path;              // mesh
  Real scale = 1;                     // mesh
  Vec3 translate = Vec3::Zero();      // mesh
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  std::uint32_t material = 0;
};

struct ColliderSpec {
  enum class Kind { box, sdf };
  ColliderId id = 0;
  Kind kind = Kind::box;
  Vec3 half_extents = Vec3::Constant(0.05);  // box
  std::string sdf_path;                      // sdf
  SdfLookup lookup = SdfLookup::trilinear;
  Real friction = 0.5;
  ContactMode mode = ContactMode::coulomb;
  std::string group;
  ColliderPose initial;  // used when the trajectory is empty
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names = {"lifted_fraction", "detached_fraction", "mean_abs_J_minus_1",
                                                 "max_displacement"};
  return names;
}

struct SceneConfig {
  std::string name = "scene";
  Domain domain;
  SimParams params;
  std::vector<MaterialSpec> materials;
  std::vector<BodySpec> bodies;
  std::vector<ColliderSpec> colliders;
  std::vector<Keyframe> trajectory;
  std::vector<std::string> metrics = known_metrics();
  Real duration = 1.0;
  /// Iso level as a fraction of the body's density.
  Real iso_fraction = 0.3;

  std::size_t particle_count() const {
    std::size_t n = 0;
    for (const auto& b : bodies) n += b.count;
    return n;
  }
  Real frame_dt() const { return params.dt * params.substeps_per_frame; }
  int frame_count() const { return static_cast<int>(std::ceil(duration / frame_dt() - 1e-9)); }

  /// Rejects inconsistent configs. Mesh bodies are checked for domain
  /// containment when their file is readable.
  void validate() const {
    using C = SceneError::Code;
    try {
      domain.validate();
      params.validate();
    } catch (const ParameterError& e) {
      throw SceneError(C::bad_value, e.what());
    }
    if (!(duration > 0)) throw SceneError(C::bad_value, "duration must be positive");
    if (!(iso_fraction > 0)) throw SceneError(C::bad_value, "iso_fraction must be positive");
    if (materials.empty()) throw SceneError(C::missing_key, "scene defines no materials");
    for (std::size_t m = 0; m < materials.size(); ++m) {
      try {
        (void)materials[m].build();
      } catch (const ParameterError& e) {
        throw SceneError(C::bad_value, "material " + std::to_string(m) + ": " + e.what());
      }
    }
    const Real dx = domain.dx();
    const Vec3 lo = Vec3::Constant(1.5 * dx);
    const Vec3 hi(domain.resolution[0] - 2.5, domain.resolution[1] - 2.5, domain.resolution[2] - 2.5);
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      const auto& body = bodies[b];
      if (body.material >= materials.size())
        throw SceneError(C::dangling_material, "body " + std::to_string(b) + " references material " +
                                                   std::to_string(body.material) + " which does not exist");
      if (body.count == 0) throw SceneError(C::bad_value, "body " + std::to_string(b) + " has zero particles");
      if (body.kind == BodySpec::Kind::box) {
        if (!(body.size.minCoeff() > 0)) throw SceneError(C::bad_value, "body " + std::to_string(b) + " has empty size");
        const Vec3 bl = body.center - 0.5 * body.size, bh = body.center + 0.5 * body.size;
        if ((bl.array() < lo.array()).any() || (bh.array() > (hi * dx).array()).any())
          throw SceneError(C::out_of_domain_spawn,
                           "body " + std::to_string(b) + " extends outside the domain interior margin");
      } else if (body.mesh_path.empty()) {
        throw SceneError(C::missing_key, "mesh body " + std::to_string(b) + " has no path");
      }
    }
    std::set<int> ids;
    for (const auto& c : colliders) {
      if (c.id == kNoCollider) throw SceneError(C::bad_value, "collider id 255 is reserved");
      if (!ids.insert(c.id).second)
        throw SceneError(C::duplicate_collider_id, "collider id " + std::to_string(c.id) + " is used twice");
      if (c.kind == ColliderSpec::Kind::box && !(c.half_extents.minCoeff() > 0))
        throw SceneError(C::bad_value, "collider " + std::to_string(c.id) + " has non-positive half extents");
      if (c.kind == ColliderSpec::Kind::sdf && c.sdf_path.empty())
        throw SceneError(C::missing_key, "sdf collider " + std::to_string(c.id) + " has no path");
      if (!(c.friction >= 0)) throw SceneError(C::bad_value, "friction must be >= 0");
    }
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
      if (k > 0 && !(trajectory[k].time > trajectory[k - 1].time))
        throw SceneError(C::non_increasing_keyframes,
                         "keyframe " + std::to_string(k) + " time is not strictly after its predecessor");
      if (trajectory[k].poses.size() != colliders.size())
        throw SceneError(C::dangling_collider, "keyframe " + std::to_string(k) + " does not pose every collider");
      for (const auto& p : trajectory[k].poses)
        if (std::abs(p.orientation.norm() - 1) > 1e-6)
          throw SceneError(C::bad_value, "keyframe " + std::to_string(k) + " has a non-unit quaternion");
    }
    for (const auto& m : metrics)
      if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end())
        throw SceneError(C::bad_value, "unknown metric '" + m + "'");
  }
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw SceneError(SceneError::Code::bad_value, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SceneError(SceneError::Code::unknown_key, "unknown key '" + key + "' in " + where);
  }
}

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw SceneError(SceneError::Code::missing_key, "missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

template <typename T>
T number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SceneError(SceneError::Code::bad_value, where + " must be a number");
  return j.get<T>();
}

inline Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SceneError(SceneError::Code::bad_value, where + " must be [x, y, z]");
  return Vec3(number<Real>(j[0], where), number<Real>(j[1], where), number<Real>(j[2], where));
}

/// Quaternions are written [x, y, z, w].
inline Quat quat(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw SceneError(SceneError::Code::bad_value, where + " must be [x, y, z, w]");
  return Quat(number<Real>(j[3], where), number<Real>(j[0], where), number<Real>(j[1], where),
              number<Real>(j[2], where));
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json to_json(const Quat& q) { return json::array({q.x(), q.y(), q.z(), q.w()}); }

inline JawState jaw(const json& j, const std::string& where) {
  const auto s = j.get<std::string>();
  if (s == "open") return JawState::open;
  if (s == "closed") return JawState::closed;
  throw SceneError(SceneError::Code::bad_value, where + " must be \"open\" or \"closed\"");
}

inline ColliderPose pose(const json& j, const std::string& where) {
  only_keys(j, {"collider", "position", "orientation", "jaw"}, where);
  ColliderPose p;
  p.position = vec3(need(j, "position", where), where + ".position");
  if (j.contains("orientation")) p.orientation = quat(j["orientation"], where + ".orientation");
  if (j.contains("jaw")) p.jaw = jaw(j["jaw"], where + ".jaw");
  return p;
}

inline json pose_json(const ColliderPose& p) {
  return json{{"position", to_json(p.position)},
              {"orientation", to_json(p.orientation)},
              {"jaw", p.jaw == JawState::open ? "open" : "closed"}};
}

}  // namespace detail

/// Parses and validates a scene document. Unknown keys are rejected.
inline SceneConfig scene_from_json(const nlohmann::json& doc) {
  using namespace detail;
  using C = SceneError::Code;
  SceneConfig s;
  only_keys(doc, {"name", "domain", "params", "materials", "bodies", "colliders", "trajectory", "metrics",
                  "duration", "surface"},
            "scene");
  try {
    if (doc.contains("name")) s.name = doc["name"].get<std::string>();
    if (doc.contains("domain")) {
      const auto& d = doc["domain"];
      only_keys(d, {"extent", "resolution"}, "domain");
      if (d.contains("extent")) s.domain.extent = vec3(d["extent"], "domain.extent");
      if (d.contains("resolution")) {
        const auto& r = d["resolution"];
        if (r.is_number_integer()) {
          s.domain.resolution = {r.get<int>(), r.get<int>(), r.get<int>()};
        } else {
          const Vec3 v = vec3(r, "domain.resolution");
          s.domain.resolution = {static_cast<int>(v.x()), static_cast<int>(v.y()), static_cast<int>(v.z())};
        }
      }
    }
    if (doc.contains("params")) {
      const auto& p = doc["params"];
      only_keys(p, {"dt", "substeps_per_frame", "gravity", "boundary_width", "boundary", "collision_threshold",
                    "deterministic"},
                "params");
      if (p.contains("dt")) s.params.dt = number<Real>(p["dt"], "params.dt");
      if (p.contains("substeps_per_frame")) s.params.substeps_per_frame = p["substeps_per_frame"].get<int>();
      if (p.contains("gravity")) s.params.gravity = vec3(p["gravity"], "params.gravity");
      if (p.contains("boundary_width")) s.params.boundary_width = p["boundary_width"].get<int>();
      if (p.contains("boundary")) {
        const auto b = p["boundary"].get<std::string>();
        if (b == "separate") s.params.boundary = BoundaryMode::separate;
        else if (b == "stick") s.params.boundary = BoundaryMode::stick;
        else throw SceneError(C::bad_value, "params.boundary must be \"separate\" or \"stick\"");
      }
      if (p.contains("collision_threshold"))
        s.params.collision_threshold = number<Real>(p["collision_threshold"], "params.collision_threshold");
      if (p.contains("deterministic")) s.params.deterministic = p["deterministic"].get<bool>();
    }
    for (const auto& m : need(doc, "materials", "scene")) {
      only_keys(m, {"young_modulus", "poisson_ratio", "density"}, "material");
      MaterialSpec spec;
      spec.young_modulus = number<Real>(need(m, "young_modulus", "material"), "young_modulus");
      if (m.contains("poisson_ratio")) spec.poisson_ratio = number<Real>(m["poisson_ratio"], "poisson_ratio");
      if (m.contains("density")) spec.density = number<Real>(m["density"], "density");
      s.materials.push_back(spec);
    }
    for (const auto& b : need(doc, "bodies", "scene")) {
      only_keys(b, {"shape", "center", "size", "path", "scale", "translate", "count", "seed", "material"}, "body");
      BodySpec body;
      const auto shape = need(b, "shape", "body").get<std::string>();
      if (shape == "box") {
        body.kind = BodySpec::Kind::box;
        body.center = vec3(need(b, "center", "body"), "body.center");
        body.size = vec3(need(b, "size", "body"), "body.size");
      } else if (shape == "mesh") {
        body.kind = BodySpec::Kind::mesh;
        body.mesh_path = need(b, "path", "body").get<std::string>();
        if (b.contains("scale")) body.scale = number<Real>(b["scale"], "body.scale");
        if (b.contains("translate")) body.translate = vec3(b["translate"], "body.translate");
      } else {
        throw SceneError(C::bad_value, "body.shape must be \"box\" or \"mesh\"");
      }
      body.count = need(b, "count", "body").get<std::size_t>();
      if (b.contains("seed")) body.seed = b["seed"].get<std::uint64_t>();
      if (b.contains("material")) body.material = b["material"].get<std::uint32_t>();
      s.bodies.push_back(body);
    }
    if (doc.contains("colliders")) {
      for (const auto& c : doc["colliders"]) {
        only_keys(c, {"id", "shape", "half_extents", "path", "lookup", "friction", "mode", "group", "position",
                      "orientation"},
                  "collider");
        ColliderSpec spec;
        const int id = need(c, "id", "collider").get<int>();
        if (id < 0 || id >= kNoCollider) throw SceneError(C::bad_value, "collider id must be in [0, 254]");
        spec.id = static_cast<ColliderId>(id);
        const auto shape = need(c, "shape", "collider").get<std::string>();
        if (shape == "box") {
          spec.kind = ColliderSpec::Kind::box;
          spec.half_extents = vec3(need(c, "half_extents", "collider"), "collider.half_extents");
        } else if (shape == "sdf") {
          spec.kind = ColliderSpec::Kind::sdf;
          spec.sdf_path = need(c, "path", "collider").get<std::string>();
        } else {
          throw SceneError(C::bad_value, "collider.shape must be \"box\" or \"sdf\"");
        }
        if (c.contains("lookup")) {
          const auto l = c["lookup"].get<std::string>();
          if (l == "trilinear") spec.lookup = SdfLookup::trilinear;
          else if (l == "nearest") spec.lookup = SdfLookup::nearest;
          else throw SceneError(C::bad_value, "collider.lookup must be \"trilinear\" or \"nearest\"");
        }
        if (c.contains("friction")) spec.friction = number<Real>(c["friction"], "collider.friction");
        if (c.contains("mode")) {
          const auto m = c["mode"].get<std::string>();
          if (m == "coulomb") spec.mode = ContactMode::coulomb;
          else if (m == "sticky") spec.mode = ContactMode::sticky;
          else throw SceneError(C::bad_value, "collider.mode must be \"coulomb\" or \"sticky\"");
        }
        if (c.contains("group")) spec.group = c["group"].get<std::string>();
        if (c.contains("position")) spec.initial.position = vec3(c["position"], "collider.position");
        if (c.contains("orientation")) spec.initial.orientation = quat(c["orientation"], "collider.orientation");
        s.colliders.push_back(spec);
      }
    }
    if (doc.contains("trajectory")) {
      for (const auto& k : doc["trajectory"]) {
        only_keys(k, {"time", "poses"}, "keyframe");
        Keyframe key;
        key.time = number<Real>(need(k, "time", "keyframe"), "keyframe.time");
        key.poses.resize(s.colliders.size());
        std::vector<bool> seen(s.colliders.size(), false);
        for (const auto& p : need(k, "poses", "keyframe")) {
          const int id = need(p, "collider", "pose").get<int>();
          auto it = std::find_if(s.colliders.begin(), s.colliders.end(), [&](const auto& c) { return c.id == id; });
          if (it == s.colliders.end())
            throw SceneError(C::dangling_collider, "keyframe pose references unknown collider " + std::to_string(id));
          const auto slot = static_cast<std::size_t>(it - s.colliders.begin());
          key.poses[slot] = pose(p, "pose");
          seen[slot] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
          throw SceneError(C::dangling_collider, "keyframe at t=" + std::to_string(key.time) +
                                                     " does not pose every collider");
        s.trajectory.push_back(std::move(key));
      }
    }
    if (doc.contains("metrics")) s.metrics = doc["metrics"].get<std::vector<std::string>>();
    s.duration = number<Real>(need(doc, "duration", "scene"), "duration");
    if (doc.contains("surface")) {
      only_keys(doc["surface"], {"iso_fraction"}, "surface");
      if (doc["surface"].contains("iso_fraction"))
        s.iso_fraction = number<Real>(doc["surface"]["iso_fraction"], "surface.iso_fraction");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SceneError(C::bad_value, std::string("malformed scene: ") + e.what());
  }
  s.validate();
  return s;
}

inline SceneConfig load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(SceneError::Code::syntax, "cannot open scene file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneError(SceneError::Code::syntax, path.string() + ": " + e.what());
  }
  return scene_from_json(doc);
}

inline nlohmann::json scene_to_json(const SceneConfig& s) {
  using detail::json;
  using detail::to_json;
  json doc;
  doc["name"] = s.name;
  doc["domain"] = {{"extent", to_json(s.domain.extent)},
                   {"resolution", json::array({s.domain.resolution[0], s.domain.resolution[1], s.domain.resolution[2]})}};
  doc["params"] = {{"dt", s.params.dt},
                   {"substeps_per_frame", s.params.substeps_per_frame},
                   {"gravity", to_json(s.params.gravity)},
                   {"boundary_width", s.params.boundary_width},
                   {"boundary", s.params.boundary == BoundaryMode::stick ? "stick" : "separate"},
                   {"collision_threshold", s.params.collision_threshold},
                   {"deterministic", s.params.deterministic}};
  doc["materials"] = json::array();
  for (const auto& m : s.materials)
    doc["materials"].push_back({{"young_modulus", m.young_modulus}, {"poisson_ratio", m.poisson_ratio}, {"density", m.density}});
  doc["bodies"] = json::array();
  for (const auto& b : s.bodies) {
    json j{{"count", b.count}, {"seed", b.seed}, {"material", b.material}};
    if (b.kind == BodySpec::Kind::box) {
      j["shape"] = "box";
      j["center"] = to_json(b.center);
      j["size"] = to_json(b.size);
    } else {
      j["shape"] = "mesh";
      j["path"] = b.mesh_path;
      j["scale"] = b.scale;
      j["translate"] = to_json(b.translate);
    }
    doc["bodies"].push_back(j);
  }
  doc["colliders"] = json::array();
  for (const auto& c : s.colliders) {
    json j{{"id", c.id},
           {"friction", c.friction},
           {"mode", c.mode == ContactMode::sticky ? "sticky" : "coulomb"},
           {"group", c.group},
           {"position", to_json(c.initial.position)},
           {"orientation", to_json(c.initial.orientation)}};
    if (c.kind == ColliderSpec::Kind::box) {
      j["shape"] = "box";
      j["half_extents"] = to_json(c.half_extents);
    } else {
      j["shape"] = "sdf";
      j["path"] = c.sdf_path;
      j["lookup"] = c.lookup == SdfLookup::nearest ? "nearest" : "trilinear";
    }
    doc["colliders"].push_back(j);
  }
  doc["trajectory"] = json::array();
  for (const auto& k : s.trajectory) {
    json poses = json::array();
    for (std::size_t c = 0; c < k.poses.size(); ++c) {
      json p = detail::pose_json(k.poses[c]);
      p["collider"] = s.colliders[c].id;
      poses.push_back(p);
    }
    doc["trajectory"].push_back({{"time", k.time}, {"poses", poses}});
  }
  doc["metrics"] = s.metrics;
  doc["duration"] = s.duration;
  doc["surface"] = {{"iso_fraction", s.iso_fraction}};
  return doc;
}

}  // namespace mpmsim
