#pragma once

#include "mpmsim/collider.hpp"
#include "mpmsim/surfacing.hpp"
#include "mpmsim/trajectory.hpp"
#include "mpmsim/types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mpmsim {

class WireError : public Error {
 public:
  using Error::Error;
};

struct WireCollider {
  std::uint32_t id = 0;
  std::array<float, 3> translation{};
  std::array<float, 4> rotation{0, 0, 0, 1};  // x, y, z, w
  std::uint8_t jaw = 0;                       // 0 open, 1 closed

  bool operator==(const WireCollider&) const = default;
};

/// Decoded form of one binary frame message. Everything is stored at wire
/// precision so encode/decode round-trips exactly.
struct WireFrame {
  std::uint32_t frame_index = 0;
  float sim_time = 0;
  std::vector<std::array<float, 3>> vertices;
  std::vector<std::array<float, 3>> normals;
  std::vector<std::array<float, 2>> uvs;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<WireCollider> colliders;

  bool operator==(const WireFrame&) const = default;
};

inline constexpr std::array<char, 4> kFrameMagic = {'M', 'P', 'M', 'F'};
inline constexpr std::size_t kFrameHeaderBytes = 20;
inline constexpr std::size_t kMaxWireVertices = std::size_t{1} << 24;

/// index_count in the header counts triangles; each contributes 12 bytes.
inline std::size_t encoded_size(std::size_t vertices, std::size_t triangles, std::size_t colliders) {
  return kFrameHeaderBytes + 32 * vertices + 12 * triangles + 4 + 33 * colliders;
}

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { bytes_.reserve(reserve); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw WireError("frame message truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Binary frame message, little-endian. Returns nullopt for meshes above
/// 2^24 vertices.
inline std::optional<std::vector<std::uint8_t>> encode_frame(const WireFrame& f) {
  if (f.vertices.size() > kMaxWireVertices) return std::nullopt;
  if (f.normals.size() != f.vertices.size() || f.uvs.size() != f.vertices.size())
    throw WireError("normals and uvs must match the vertex count");
  detail::ByteWriter w(encoded_size(f.vertices.size(), f.triangles.size(), f.colliders.size()));
  w.raw(kFrameMagic.data(), 4);
  w.u32(f.frame_index);
  w.f32(f.sim_time);
  w.u32(static_cast<std::uint32_t>(f.vertices.size()));
  w.u32(static_cast<std::uint32_t>(f.triangles.size()));
  for (const auto& v : f.vertices)
    for (float c : v) w.f32(c);
  for (const auto& n : f.normals)
    for (float c : n) w.f32(c);
  for (const auto& t : f.uvs)
    for (float c : t) w.f32(c);
  for (const auto& t : f.triangles)
    for (auto i : t) w.u32(i);
  w.u32(static_cast<std::uint32_t>(f.colliders.size()));
  for (const auto& c : f.colliders) {
    w.u32(c.id);
    for (float x : c.translation) w.f32(x);
    for (float x : c.rotation) w.f32(x);
    w.u8(c.jaw);
  }
  return w.take();
}

inline WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  for (char m : kFrameMagic)
    if (r.u8() != static_cast<std::uint8_t>(m)) throw WireError("bad frame magic");
  WireFrame f;
  f.frame_index = r.u32();
  f.sim_time = r.f32();
  const std::size_t nv = r.u32(), nt = r.u32();
  if (nv > kMaxWireVertices) throw WireError("vertex count exceeds limit");
  if (r.remaining() < 32 * nv + 12 * nt + 4) throw WireError("frame message truncated");
  f.vertices.resize(nv);
  f.normals.resize(nv);
  f.uvs.resize(nv);
  f.triangles.resize(nt);
  for (auto& v : f.vertices)
    for (float& c : v) c = r.f32();
  for (auto& n : f.normals)
    for (float& c : n) c = r.f32();
  for (auto& t : f.uvs)
    for (float& c : t) c = r.f32();
  for (auto& t : f.triangles)
    for (auto& i : t) {
      i = r.u32();
      if (i >= nv) throw WireError("triangle index out of range");
    }
  const std::size_t nc = r.u32();
  if (r.remaining() != 33 * nc) throw WireError("collider block length does not match its count");
  f.colliders.resize(nc);
  for (auto& c : f.colliders) {
    c.id = r.u32();
    for (float& x : c.translation) x = r.f32();
    for (float& x : c.rotation) x = r.f32();
    c.jaw = r.u8();
  }
  return f;
}

/// Packs a surface mesh and collider poses into wire precision.
inline WireFrame make_wire_frame(const SurfaceMesh& mesh, std::span<const RigidCollider> colliders,
                                 std::span<const JawState> jaws, std::uint32_t frame_index, Real time) {
  WireFrame f;
  f.frame_index = frame_index;
  f.sim_time = static_cast<float>(time);
  const std::size_t nv = mesh.vertices.size();
  f.vertices.resize(nv);
  f.normals.resize(nv);
  f.uvs.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    for (int a = 0; a < 3; ++a) {
      f.vertices[v][a] = static_cast<float>(mesh.vertices[v][a]);
      f.normals[v][a] = v < mesh.normals.size() ? static_cast<float>(mesh.normals[v][a]) : 0.0f;
    }
    if (v < mesh.uvs.size()) f.uvs[v] = {static_cast<float>(mesh.uvs[v][0]), static_cast<float>(mesh.uvs[v][1])};
  }
  f.triangles = mesh.indices;
  for (std::size_t c = 0; c < colliders.size(); ++c) {
    const auto& col = colliders[c];
    const Quat q(col.rotation);
    WireCollider w;
    w.id = col.id;
    w.translation = {static_cast<float>(col.translation.x()), static_cast<float>(col.translation.y()),
                     static_cast<float>(col.translation.z())};
    w.rotation = {static_cast<float>(q.x()), static_cast<float>(q.y()), static_cast<float>(q.z()),
                  static_cast<float>(q.w())};
    w.jaw = c < jaws.size() && jaws[c] == JawState::closed ? 1 : 0;
    f.colliders.push_back(w);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Control messages (client -> server, JSON text)
// ---------------------------------------------------------------------------

class ControlError : public Error {
 public:
  using Error::Error;
};

struct SetToolTarget {
  std::string collider_group;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  JawState jaw = JawState::open;
};
struct Pause {};
struct Resume {};
struct Reset {
  std::optional<std::string> scenario;
};
struct SetMaterial {
  Real young_modulus = 0;
  Real poisson_ratio = 0;
};

using ControlMsg = std::variant<SetToolTarget, Pause, Resume, Reset, SetMaterial>;

inline constexpr Real kQuaternionNormTolerance = 1e-3;

namespace detail {

inline void control_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ControlError("unexpected field '" + key + "'");
  }
}

inline Real control_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ControlError(std::string("field '") + key + "' must be a number");
  const Real v = j[key].get<Real>();
  if (!std::isfinite(v)) throw ControlError(std::string("field '") + key + "' must be finite");
  return v;
}

inline std::vector<Real> control_array(const nlohmann::json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != n)
    throw ControlError(std::string("field '") + key + "' must be an array of " + std::to_string(n) + " numbers");
  std::vector<Real> out;
  for (const auto& x : j[key]) {
    if (!x.is_number()) throw ControlError(std::string("field '") + key + "' must hold numbers");
    out.push_back(x.get<Real>());
    if (!std::isfinite(out.back())) throw ControlError(std::string("field '") + key + "' must be finite");
  }
  return out;
}

}  // namespace detail

/// Parses and validates one control message. Quaternions within 1e-3 of unit
/// norm are renormalized; anything else is rejected.
inline ControlMsg parse_control(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ControlError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ControlError("control message needs a string 'type'");
  const auto type = j["type"].get<std::string>();
  if (type == "set_tool_target") {
    detail::control_keys(j, {"type", "collider_group", "position", "orientation", "jaw"});
    SetToolTarget m;
    if (!j.contains("collider_group") || !j["collider_group"].is_string())
      throw ControlError("field 'collider_group' must be a string");
    m.collider_group = j["collider_group"].get<std::string>();
    const auto p = detail::control_array(j, "position", 3);
    m.position = Vec3(p[0], p[1], p[2]);
    const auto q = detail::control_array(j, "orientation", 4);
    m.orientation = Quat(q[3], q[0], q[1], q[2]);
    const Real norm = m.orientation.norm();
    if (std::abs(norm - 1) > kQuaternionNormTolerance) throw ControlError("orientation is not a unit quaternion");
    m.orientation.normalize();
    if (!j.contains("jaw") || !j["jaw"].is_string()) throw ControlError("field 'jaw' must be \"open\" or \"closed\"");
    const auto jaw = j["jaw"].get<std::string>();
    if (jaw == "open") m.jaw = JawState::open;
    else if (jaw == "closed") m.jaw = JawState::closed;
    else throw ControlError("field 'jaw' must be \"open\" or \"closed\"");
    return m;
  }
  if (type == "pause") {
    detail::control_keys(j, {"type"});
    return Pause{};
  }
  if (type == "resume") {
    detail::control_keys(j, {"type"});
    return Resume{};
  }
  if (type == "reset") {
    detail::control_keys(j, {"type", "scenario"});
    Reset m;
    if (j.contains("scenario")) {
      if (!j["scenario"].is_string()) throw ControlError("field 'scenario' must be a string");
      m.scenario = j["scenario"].get<std::string>();
    }
    return m;
  }
  if (type == "set_material") {
    detail::control_keys(j, {"type", "E", "nu"});
    SetMaterial m{detail::control_number(j, "E"), detail::control_number(j, "nu")};
    if (!(m.young_modulus > 0) || !(m.poisson_ratio >= 0 && m.poisson_ratio < 0.5))
      throw ControlError("set_material needs E > 0 and 0 <= nu < 0.5");
    return m;
  }
  throw ControlError("unknown control type '" + type + "'");
}

inline std::string to_json_text(const ControlMsg& msg) {
  nlohmann::json j;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SetToolTarget>) {
          j = {{"type", "set_tool_target"},
               {"collider_group", m.collider_group},
               {"position", {m.position.x(), m.position.y(), m.position.z()}},
               {"orientation", {m.orientation.x(), m.orientation.y(), m.orientation.z(), m.orientation.w()}},
               {"jaw", m.jaw == JawState::closed ? "closed" : "open"}};
        } else if constexpr (std::is_same_v<M, Pause>) {
          j = {{"type", "pause"}};
        } else if constexpr (std::is_same_v<M, Resume>) {
          j = {{"type", "resume"}};
        } else if constexpr (std::is_same_v<M, Reset>) {
          j = {{"type", "reset"}};
          if (m.scenario) j["scenario"] = *m.scenario;
        } else {
          j = {{"type", "set_material"}, {"E", m.young_modulus}, {"nu", m.poisson_ratio}};
        }
      },
      msg);
  return j.dump();
}

}  // namespace mpmsim
