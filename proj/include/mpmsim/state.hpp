#pragma once

#include "mpmsim/collision_field.hpp"
#include "mpmsim/grid.hpp"
#include "mpmsim/kernel.hpp"
#include "mpmsim/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mpmsim {

struct Particle {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 F = Mat3::Identity();
  Mat3 C = Mat3::Zero();
  Real mass = 0;
  Real rest_volume = 0;
  std::uint32_t material_id = 0;
};

/// What the grid update does inside the boundary band.
enum class BoundaryMode {
  separate,  // outward normal velocity clamped to <= 0
  stick,     // velocity zeroed
};

struct SimParams {
  Real dt = 5e-4;
  int substeps_per_frame = 25;
  Vec3 gravity = Vec3(0, -9.8, 0);
  int boundary_width = 3;
  BoundaryMode boundary = BoundaryMode::separate;
  /// Contact threshold in meters; <= 0 selects half a grid cell.
  Real collision_threshold = 0;
  /// Colored, lock-free scatter that is bitwise reproducible for any thread count.
  bool deterministic = false;

  void validate() const {
    if (!(dt > 0)) throw ParameterError("dt must be positive");
    if (substeps_per_frame < 1) throw ParameterError("substeps_per_frame must be >= 1");
    if (boundary_width < 0) throw ParameterError("boundary_width must be >= 0");
    if (!gravity.allFinite()) throw ParameterError("gravity must be finite");
  }

  Real theta(Real dx) const { return collision_threshold > 0 ? collision_threshold : 0.5 * dx; }
};

struct SimState {
  std::vector<Particle> particles;
  Grid grid;
  CollisionField collision;
  Real time = 0;
  std::int64_t step_count = 0;  // substeps taken

  SimState() = default;
  explicit SimState(const Domain& domain) : grid(domain) {}

  /// Throws StencilRangeError / ParameterError if any particle violates its invariants.
  void validate() const {
    for (std::size_t p = 0; p < particles.size(); ++p) {
      const auto& part = particles[p];
      if (!(part.mass > 0) || !(part.rest_volume > 0))
        throw ParameterError("particle " + std::to_string(p) + " has non-positive mass or volume");
      (void)bspline_weights(part.x, grid);
    }
  }
};

inline bool state_is_finite(const SimState& state) {
  for (const auto& p : state.particles)
    if (!p.x.allFinite() || !p.v.allFinite() || !p.F.allFinite() || !p.C.allFinite()) return false;
  return true;
}

/// Wall-clock accounting of one frame. Category names mirror the report columns.
struct StepReport {
  int substeps = 0;
  Real sim_time_advanced = 0;
  Real collision_detection_ms = 0;
  Real soft_simulation_ms = 0;
  Real other_ms = 0;
  Real total_ms = 0;
  std::size_t inverted_events = 0;

  Real category_sum_ms() const { return collision_detection_ms + soft_simulation_ms + other_ms; }
};

}  // namespace mpmsim
