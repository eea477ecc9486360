#pragma once

#include "mpmsim/state.hpp"
#include "mpmsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace mpmsim {

struct MetricSample {
  Real time = 0;
  Real lifted_fraction = 0;
  Real detached_fraction = 0;
  Real mean_abs_J_minus_1 = 0;
  Real max_displacement = 0;
};

/// Rest configuration the metrics are measured against.
struct MetricBaseline {
  std::vector<Vec3> initial_positions;
  /// Lowest initial particle height; particles within one cell of it are the
  /// ones resting on the support.
  Real rest_floor = 0;
  Real dx = 0;

  MetricBaseline() = default;
  MetricBaseline(const SimState& state) : dx(state.grid.dx()) {
    initial_positions.reserve(state.particles.size());
    rest_floor = state.particles.empty() ? 0 : state.particles.front().x.y();
    for (const auto& p : state.particles) {
      initial_positions.push_back(p.x);
      rest_floor = std::min(rest_floor, p.x.y());
    }
  }
};

/// lifted: particle raised more than 2 cells above its initial height.
/// detached: a particle that started on the support now more than one cell
/// above its rest height, as a fraction of those support particles.
inline MetricSample compute_metrics(const SimState& state, const MetricBaseline& base) {
  MetricSample m;
  m.time = state.time;
  const std::size_t n = std::min(state.particles.size(), base.initial_positions.size());
  if (n == 0) return m;
  std::size_t lifted = 0, support = 0, detached = 0;
  Real sum_j = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto& part = state.particles[p];
    const Vec3& x0 = base.initial_positions[p];
    if (part.x.y() > x0.y() + 2 * base.dx) ++lifted;
    if (x0.y() <= base.rest_floor + base.dx) {
      ++support;
      if (part.x.y() > x0.y() + base.dx) ++detached;
    }
    sum_j += std::abs(part.F.determinant() - 1);
    m.max_displacement = std::max(m.max_displacement, (part.x - x0).norm());
  }
  m.lifted_fraction = static_cast<Real>(lifted) / static_cast<Real>(n);
  m.detached_fraction = support ? static_cast<Real>(detached) / static_cast<Real>(support) : 0;
  m.mean_abs_J_minus_1 = sum_j / static_cast<Real>(n);
  return m;
}

inline constexpr const char* kMetricsHeader = "time,lifted_fraction,detached_fraction,mean_abs_J_minus_1,max_displacement";

inline std::string metrics_row(const MetricSample& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g,%.9g", m.time, m.lifted_fraction, m.detached_fraction,
                m.mean_abs_J_minus_1, m.max_displacement);
  return buf;
}

}  // namespace mpmsim
