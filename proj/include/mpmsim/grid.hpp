#pragma once

#include "mpmsim/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mpmsim {

/// Axis-aligned simulation box anchored at the origin.
struct Domain {
  Vec3 extent = Vec3::Ones();
  Index3 resolution{64, 64, 64};

  /// Cell size. Domains are validated to be isotropic, so axis 0 is representative.
  Real dx() const { return extent.x() / resolution[0]; }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (resolution[a] < 4) throw ParameterError("grid resolution must be >= 4 per axis");
      if (!(extent[a] > 0)) throw ParameterError("domain extent must be positive");
    }
    const Real h = dx();
    for (int a = 1; a < 3; ++a)
      if (std::abs(extent[a] / resolution[a] - h) > 1e-9 * h)
        throw ParameterError("domain cells must be cubic (extent/resolution equal on every axis)");
  }
};

/// Momentum during transfer, velocity after the grid update.
struct GridNode {
  Vec3 momentum = Vec3::Zero();
  Real mass = 0;
};

class Grid {
 public:
  Grid() = default;
  explicit Grid(const Domain& domain)
      : resolution_(domain.resolution), dx_(domain.dx()) {
    domain.validate();
    nodes_.resize(static_cast<std::size_t>(resolution_[0]) * resolution_[1] *
                  resolution_[2]);
  }

  const Index3& resolution() const noexcept { return resolution_; }
  Real dx() const noexcept { return dx_; }
  Real inv_dx() const noexcept { return 1.0 / dx_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * resolution_[1] + j) * resolution_[2] + k;
  }
  Index3 coords(std::size_t idx) const noexcept {
    const int k = static_cast<int>(idx % resolution_[2]);
    const std::size_t rest = idx / resolution_[2];
    return {static_cast<int>(rest / resolution_[1]),
            static_cast<int>(rest % resolution_[1]), k};
  }
  Vec3 node_position(int i, int j, int k) const noexcept {
    return Vec3(i, j, k) * dx_;
  }
  Vec3 node_position(std::size_t idx) const noexcept {
    const auto c = coords(idx);
    return node_position(c[0], c[1], c[2]);
  }

  GridNode& operator[](std::size_t idx) noexcept { return nodes_[idx]; }
  const GridNode& operator[](std::size_t idx) const noexcept { return nodes_[idx]; }
  GridNode& at(int i, int j, int k) noexcept { return nodes_[index(i, j, k)]; }
  const GridNode& at(int i, int j, int k) const noexcept { return nodes_[index(i, j, k)]; }

  std::vector<GridNode>& nodes() noexcept { return nodes_; }
  const std::vector<GridNode>& nodes() const noexcept { return nodes_; }

  void clear() noexcept {
    for (auto& n : nodes_) n = GridNode{};
  }

  /// Lowest and highest admissible particle coordinate (in meters) along an
  /// axis: the 3x3x3 stencil must stay on the node lattice [0, res-1].
  Real lower_margin() const noexcept { return 1.5 * dx_; }
  Real upper_margin(int axis) const noexcept { return (resolution_[axis] - 2.5) * dx_; }

 private:
  Index3 resolution_{0, 0, 0};
  Real dx_ = 0;
  std::vector<GridNode> nodes_;
};

}  // namespace mpmsim
